//! The nine ansatz architectures of the generator.
//!
//! Every builder uses only Ry, Rz and CX gates. Layer sizes are fixed so that
//! the parameter counts at eight qubits are:
//!
//! | name           | params |
//! |----------------|--------|
//! | Linear         | 16     |
//! | TTN            | 29     |
//! | TTN_Rz         | 58     |
//! | MERA           | 45     |
//! | MERA_Rz        | 90     |
//! | MERA-up        | 23     |
//! | MERA-up_d2     | 46     |
//! | MERA-up_Rz     | 46     |
//! | MERA-up_d2_Rz  | 92     |

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{QagError, Result};
use crate::sim::{Circuit, Gate, GateKind, Instruction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseArchitecture {
    Linear,
    Ttn,
    Mera,
    MeraUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    D2,
    Rz,
}

/// A named architecture: a base topology plus optional `_d2` / `_Rz` variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Architecture {
    pub base: BaseArchitecture,
    pub d2: bool,
    pub rz: bool,
}

impl Architecture {
    pub const LINEAR: Self = Self::new(BaseArchitecture::Linear, false, false);
    pub const TTN: Self = Self::new(BaseArchitecture::Ttn, false, false);
    pub const TTN_RZ: Self = Self::new(BaseArchitecture::Ttn, false, true);
    pub const MERA: Self = Self::new(BaseArchitecture::Mera, false, false);
    pub const MERA_RZ: Self = Self::new(BaseArchitecture::Mera, false, true);
    pub const MERA_UP: Self = Self::new(BaseArchitecture::MeraUp, false, false);
    pub const MERA_UP_D2: Self = Self::new(BaseArchitecture::MeraUp, true, false);
    pub const MERA_UP_RZ: Self = Self::new(BaseArchitecture::MeraUp, false, true);
    pub const MERA_UP_D2_RZ: Self = Self::new(BaseArchitecture::MeraUp, true, true);

    /// The nine studied architectures in table order.
    pub const ALL: [Self; 9] = [
        Self::LINEAR,
        Self::TTN,
        Self::TTN_RZ,
        Self::MERA,
        Self::MERA_RZ,
        Self::MERA_UP,
        Self::MERA_UP_D2,
        Self::MERA_UP_RZ,
        Self::MERA_UP_D2_RZ,
    ];

    pub const fn new(base: BaseArchitecture, d2: bool, rz: bool) -> Self {
        Architecture { base, d2, rz }
    }

    pub fn name(&self) -> String {
        let base = match self.base {
            BaseArchitecture::Linear => "Linear",
            BaseArchitecture::Ttn => "TTN",
            BaseArchitecture::Mera => "MERA",
            BaseArchitecture::MeraUp => "MERA-up",
        };
        let mut s = base.to_string();
        if self.d2 {
            s.push_str("_d2");
        }
        if self.rz {
            s.push_str("_Rz");
        }
        s
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Architecture {
    type Err = QagError;

    fn from_str(s: &str) -> Result<Self> {
        let mut rest = s;
        let mut rz = false;
        let mut d2 = false;
        if let Some(r) = rest.strip_suffix("_Rz") {
            rz = true;
            rest = r;
        }
        if let Some(r) = rest.strip_suffix("_d2") {
            d2 = true;
            rest = r;
        }
        let base = match rest {
            "Linear" => BaseArchitecture::Linear,
            "TTN" => BaseArchitecture::Ttn,
            "MERA" => BaseArchitecture::Mera,
            "MERA-up" => BaseArchitecture::MeraUp,
            _ => return Err(QagError::UnknownArchitecture(s.to_string())),
        };
        Ok(Architecture { base, d2, rz })
    }
}

impl TryFrom<String> for Architecture {
    type Error = QagError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Architecture> for String {
    fn from(a: Architecture) -> String {
        a.name()
    }
}

/// A built ansatz together with its name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub name: Architecture,
    pub n_qubits: usize,
    pub n_params: usize,
    pub circuit: Circuit,
}

impl CircuitSpec {
    pub fn gates(&self) -> &[Instruction] {
        self.circuit.instructions()
    }
}

/// Builds `name` on `n_qubits` (a power of two, at least 2; 8 is the studied size).
///
/// Variants are applied in the order `d2` then `Rz`, so `MERA-up_d2_Rz`
/// duplicates the MERA-up sequence and then follows every Ry with an Rz.
pub fn build_architecture(name: Architecture, n_qubits: usize) -> Result<CircuitSpec> {
    if n_qubits < 2 || !n_qubits.is_power_of_two() || n_qubits > crate::sim::MAX_QUBITS {
        return Err(QagError::UnsupportedQubits(n_qubits));
    }
    let mut c = Circuit::new(n_qubits);
    match name.base {
        BaseArchitecture::Linear => linear(&mut c)?,
        BaseArchitecture::Ttn => {
            ttn_down(&mut c)?;
            ttn_up(&mut c)?;
        }
        BaseArchitecture::Mera => {
            mera_down(&mut c)?;
            mera_up(&mut c)?;
        }
        BaseArchitecture::MeraUp => mera_up(&mut c)?,
    }
    let mut spec = CircuitSpec {
        name: Architecture::new(name.base, false, false),
        n_qubits,
        n_params: c.n_params(),
        circuit: c,
    };
    if name.d2 {
        spec = variant_transform(&spec, Variant::D2)?;
    }
    if name.rz {
        spec = variant_transform(&spec, Variant::Rz)?;
    }
    Ok(spec)
}

/// Applies the `_d2` (repeat everything with fresh parameters) or `_Rz`
/// (parameterized Rz right after each Ry) variant. Both double `n_params`.
pub fn variant_transform(base: &CircuitSpec, variant: Variant) -> Result<CircuitSpec> {
    let mut name = base.name;
    let instructions = base.circuit.instructions();
    let n = base.n_params;
    let out: Vec<Instruction> = match variant {
        Variant::D2 => {
            if name.d2 {
                return Err(QagError::VariantAlreadyApplied("d2"));
            }
            if name.rz {
                // Rz is defined on the final gate list, so it must come last.
                return Err(QagError::InvalidArgument("apply d2 before Rz".into()));
            }
            name.d2 = true;
            let shifted = instructions.iter().map(|ins| Instruction { gate: ins.gate, slot: ins.slot.map(|s| s + n) });
            instructions.iter().copied().chain(shifted).collect()
        }
        Variant::Rz => {
            if name.rz {
                return Err(QagError::VariantAlreadyApplied("Rz"));
            }
            name.rz = true;
            let mut next = 0;
            let mut out = Vec::with_capacity(instructions.len() * 2);
            // Slots are renumbered in gate order so the result stays 0..2n.
            for ins in instructions {
                match (ins.gate.kind, ins.slot) {
                    (GateKind::Ry, Some(_)) => {
                        out.push(Instruction { gate: ins.gate, slot: Some(next) });
                        out.push(Instruction { gate: Gate::rz(ins.gate.target, 0.0), slot: Some(next + 1) });
                        next += 2;
                    }
                    (_, Some(_)) => {
                        out.push(Instruction { gate: ins.gate, slot: Some(next) });
                        next += 1;
                    }
                    _ => out.push(*ins),
                }
            }
            out
        }
    };
    let circuit = Circuit::from_instructions(base.n_qubits, out)?;
    Ok(CircuitSpec { name, n_qubits: base.n_qubits, n_params: circuit.n_params(), circuit })
}

fn ry_layer(c: &mut Circuit, qubits: impl IntoIterator<Item = usize>) -> Result<()> {
    for q in qubits {
        c.push_param(GateKind::Ry, q)?;
    }
    Ok(())
}

fn linear(c: &mut Circuit) -> Result<()> {
    let n = c.n_qubits();
    ry_layer(c, 0..n)?;
    for q in 0..n - 1 {
        c.push(Gate::cx(q, q + 1))?;
    }
    ry_layer(c, 0..n)
}

/// Pairwise merge tree: leaves feed their right partner, ending on qubit n-1.
fn ttn_down(c: &mut Circuit) -> Result<()> {
    let n = c.n_qubits();
    ry_layer(c, 0..n)?;
    let mut d = 1;
    while d < n {
        let kept: Vec<usize> = (0..n).filter(|q| q % (2 * d) == 2 * d - 1).collect();
        for &q in &kept {
            c.push(Gate::cx(q - d, q))?;
        }
        ry_layer(c, kept)?;
        d *= 2;
    }
    Ok(())
}

/// Mirror of [`ttn_down`] without the root rotation.
fn ttn_up(c: &mut Circuit) -> Result<()> {
    let n = c.n_qubits();
    let mut d = n / 2;
    while d >= 1 {
        let informed: Vec<usize> = (0..n).filter(|q| q % (2 * d) == 2 * d - 1).collect();
        for &q in &informed {
            c.push(Gate::cx(q, q - d))?;
        }
        let layer: Vec<usize> = (0..n).filter(|q| q % d == d - 1).collect();
        ry_layer(c, layer)?;
        d /= 2;
    }
    Ok(())
}

/// Disentangler CX layer on offset neighbour pairs (1,2), (3,4), ...
fn offset_pairs(c: &mut Circuit, reversed: bool) -> Result<()> {
    let n = c.n_qubits();
    let mut q = 1;
    while q + 1 < n {
        if reversed {
            c.push(Gate::cx(q + 1, q))?;
        } else {
            c.push(Gate::cx(q, q + 1))?;
        }
        q += 2;
    }
    Ok(())
}

/// Index of the qubit the upsampling starts from.
pub fn center_qubit(n_qubits: usize) -> usize {
    n_qubits / 2 - 1
}

/// MERA-up: the centre qubit is rotated, then information fans out with CX
/// distances n/2, n/4, ..., 1 (control = informed qubit), each level followed
/// by Ry on every informed qubit; a final offset-pair entangler layer and Ry
/// layer close the block. 3n - 1 parameters.
fn mera_up(c: &mut Circuit) -> Result<()> {
    let n = c.n_qubits();
    let center = center_qubit(n);
    ry_layer(c, [center])?;
    let mut informed = vec![center];
    let mut d = n / 2;
    let mut first = true;
    while d >= 1 {
        let mut reached = Vec::with_capacity(informed.len());
        for &q in &informed {
            let t = if first { q + d } else { q - d };
            c.push(Gate::cx(q, t))?;
            reached.push(t);
        }
        informed.extend(reached);
        informed.sort_unstable();
        ry_layer(c, informed.iter().copied())?;
        first = false;
        d /= 2;
    }
    offset_pairs(c, false)?;
    ry_layer(c, 0..n)
}

/// Mirror image of [`mera_up`] that compresses onto the centre qubit; the
/// centre rotation is left to the following MERA-up block. 3n - 2 parameters.
fn mera_down(c: &mut Circuit) -> Result<()> {
    let n = c.n_qubits();
    let center = center_qubit(n);
    ry_layer(c, 0..n)?;
    offset_pairs(c, true)?;
    ry_layer(c, 0..n)?;
    // informed sets of the up block in reverse order
    let mut levels = Vec::new();
    let mut informed = vec![center];
    let mut d = n / 2;
    let mut first = true;
    while d >= 1 {
        let edges: Vec<(usize, usize)> =
            informed.iter().map(|&q| (q, if first { q + d } else { q - d })).collect();
        informed.extend(edges.iter().map(|e| e.1));
        informed.sort_unstable();
        levels.push(edges);
        first = false;
        d /= 2;
    }
    for (i, edges) in levels.iter().enumerate().rev() {
        for &(keep, leaf) in edges {
            c.push(Gate::cx(leaf, keep))?;
        }
        // the rotation after the last merge is the shared centre rotation
        if i > 0 {
            let mut kept: Vec<usize> = levels[..i].iter().flatten().flat_map(|&(a, b)| [a, b]).collect();
            kept.sort_unstable();
            kept.dedup();
            ry_layer(c, kept)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for a in Architecture::ALL {
            assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
        }
        assert!("MERA-down".parse::<Architecture>().is_err());
    }

    #[test]
    fn table_parameter_counts() {
        let expected = [16, 29, 58, 45, 90, 23, 46, 46, 92];
        for (a, e) in Architecture::ALL.iter().zip(expected) {
            let spec = build_architecture(*a, 8).unwrap();
            assert_eq!(spec.n_params, e, "{a}");
            assert_eq!(spec.circuit.n_params(), e);
        }
    }

    #[test]
    fn general_counts() {
        for n in [2usize, 4, 8] {
            let count = |a| build_architecture(a, n).unwrap().n_params;
            assert_eq!(count(Architecture::LINEAR), 2 * n);
            assert_eq!(count(Architecture::TTN), 4 * n - 3);
            assert_eq!(count(Architecture::MERA_UP), 3 * n - 1);
            assert_eq!(count(Architecture::MERA), 6 * n - 3);
        }
    }

    #[test]
    fn mera_splits_into_down_and_up() {
        let mut down = Circuit::new(8);
        mera_down(&mut down).unwrap();
        assert_eq!(down.n_params(), 22);
        let up = build_architecture(Architecture::MERA_UP, 8).unwrap();
        assert_eq!(down.n_params() + up.n_params, 45);
        let full = build_architecture(Architecture::MERA, 8).unwrap();
        let tail: Vec<_> = full.gates()[down.len()..].iter().map(|i| i.gate).collect();
        let up_gates: Vec<_> = up.gates().iter().map(|i| i.gate).collect();
        assert_eq!(tail, up_gates);
    }

    #[test]
    fn variants_double_and_refuse_reapplication() {
        for base in [Architecture::LINEAR, Architecture::TTN, Architecture::MERA, Architecture::MERA_UP] {
            let b = build_architecture(base, 8).unwrap();
            let rz = variant_transform(&b, Variant::Rz).unwrap();
            assert_eq!(rz.n_params, 2 * b.n_params);
            let d2 = variant_transform(&b, Variant::D2).unwrap();
            assert_eq!(d2.n_params, 2 * b.n_params);
            assert!(matches!(variant_transform(&rz, Variant::Rz), Err(QagError::VariantAlreadyApplied(_))));
            assert!(matches!(variant_transform(&d2, Variant::D2), Err(QagError::VariantAlreadyApplied(_))));
        }
    }

    #[test]
    fn rz_follows_each_ry() {
        let spec = build_architecture(Architecture::TTN_RZ, 8).unwrap();
        let g = spec.gates();
        for (i, ins) in g.iter().enumerate() {
            if ins.gate.kind == GateKind::Ry {
                assert_eq!(g[i + 1].gate.kind, GateKind::Rz);
                assert_eq!(g[i + 1].gate.target, ins.gate.target);
            }
        }
    }

    #[test]
    fn mera_up_fanout_distances_halve() {
        let spec = build_architecture(Architecture::MERA_UP, 8).unwrap();
        let cx: Vec<(usize, usize)> = spec
            .gates()
            .iter()
            .filter(|i| i.gate.kind == GateKind::Cx)
            .map(|i| (i.gate.control.unwrap(), i.gate.target))
            .collect();
        // 1 + 2 + 4 fan-out gates, then 3 entanglers
        assert_eq!(cx.len(), 10);
        assert_eq!(cx[0], (3, 7));
        let dists: Vec<usize> = cx[..7].iter().map(|&(c, t)| c.abs_diff(t)).collect();
        assert_eq!(dists, vec![4, 2, 2, 1, 1, 1, 1]);
        assert_eq!(&cx[7..], &[(1, 2), (3, 4), (5, 6)]);
        // each fan-out control was reached earlier
        let mut informed = vec![3usize];
        for &(c, t) in &cx[..7] {
            assert!(informed.contains(&c));
            assert!(!informed.contains(&t));
            informed.push(t);
        }
    }

    #[test]
    fn only_allowed_gates() {
        for a in Architecture::ALL {
            let spec = build_architecture(a, 8).unwrap();
            assert!(spec.gates().iter().all(|i| i.gate.kind != GateKind::H));
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_architecture(Architecture::LINEAR, 6).is_err());
        assert!(build_architecture(Architecture::LINEAR, 1).is_err());
        assert!(build_architecture(Architecture::LINEAR, 16).is_err());
    }
}
