use serde::{Deserialize, Serialize};

use crate::error::{QagError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    Ry,
    Rz,
    #[serde(rename = "CX")]
    Cx,
}

impl GateKind {
    pub fn is_parameterized(self) -> bool {
        matches!(self, GateKind::Ry | GateKind::Rz)
    }
}

/// A bound gate. `control` is set only for CX; `angle` is ignored for H and CX.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<usize>,
    #[serde(default)]
    pub angle: f64,
}

impl Gate {
    pub fn h(target: usize) -> Self {
        Gate { kind: GateKind::H, target, control: None, angle: 0.0 }
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Ry, target, control: None, angle }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Rz, target, control: None, angle }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Gate { kind: GateKind::Cx, target, control: Some(control), angle: 0.0 }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(QagError::QubitOutOfRange { index: self.target, n_qubits });
        }
        match (self.kind, self.control) {
            (GateKind::Cx, Some(c)) => {
                if c >= n_qubits {
                    return Err(QagError::QubitOutOfRange { index: c, n_qubits });
                }
                if c == self.target {
                    return Err(QagError::InvalidGate(format!("CX control equals target {c}")));
                }
            }
            (GateKind::Cx, None) => {
                return Err(QagError::InvalidGate("CX without control".into()));
            }
            (_, Some(_)) => {
                return Err(QagError::InvalidGate(format!("{:?} cannot have a control", self.kind)));
            }
            (_, None) => {}
        }
        if self.kind.is_parameterized() && !self.angle.is_finite() {
            return Err(QagError::NonFiniteAngle(self.angle));
        }
        Ok(())
    }
}

/// One circuit entry. When `slot` is set the gate angle is taken from the
/// parameter vector at bind time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub gate: Gate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
}

/// An ordered gate list with parameter slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    instructions: Vec<Instruction>,
    n_params: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit { n_qubits, instructions: Vec::new(), n_params: 0 }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Appends a fixed gate.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.instructions.push(Instruction { gate, slot: None });
        Ok(())
    }

    /// Appends a rotation bound to a fresh parameter slot and returns the slot.
    pub fn push_param(&mut self, kind: GateKind, target: usize) -> Result<usize> {
        if !kind.is_parameterized() {
            return Err(QagError::InvalidGate(format!("{kind:?} has no parameter")));
        }
        let gate = Gate { kind, target, control: None, angle: 0.0 };
        gate.validate(self.n_qubits)?;
        let slot = self.n_params;
        self.instructions.push(Instruction { gate, slot: Some(slot) });
        self.n_params += 1;
        Ok(slot)
    }

    /// Rebuilds a circuit from raw instructions, checking slot numbering.
    pub fn from_instructions(n_qubits: usize, instructions: Vec<Instruction>) -> Result<Self> {
        let mut seen = Vec::new();
        for ins in &instructions {
            ins.gate.validate(n_qubits)?;
            if let Some(s) = ins.slot {
                if !ins.gate.kind.is_parameterized() {
                    return Err(QagError::InvalidGate("slot on non-rotation gate".into()));
                }
                seen.push(s);
            }
        }
        seen.sort_unstable();
        seen.dedup();
        let n_params = seen.len();
        if seen.iter().enumerate().any(|(i, &s)| i != s) {
            return Err(QagError::InvalidGate("parameter slots must be 0..n".into()));
        }
        Ok(Circuit { n_qubits, instructions, n_params })
    }

    /// Binds parameters, producing the concrete gate sequence.
    pub fn bind(&self, params: &[f64]) -> Result<Vec<Gate>> {
        if params.len() != self.n_params {
            return Err(QagError::ParamCount { expected: self.n_params, got: params.len() });
        }
        self.instructions
            .iter()
            .map(|ins| {
                let mut g = ins.gate;
                if let Some(s) = ins.slot {
                    g.angle = params[s];
                    if !g.angle.is_finite() {
                        return Err(QagError::NonFiniteAngle(g.angle));
                    }
                }
                Ok(g)
            })
            .collect()
    }

    /// Number of CX gates.
    pub fn cx_count(&self) -> usize {
        self.instructions.iter().filter(|i| i.gate.kind == GateKind::Cx).count()
    }
}
