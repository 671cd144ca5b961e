use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use super::gate::{Circuit, Gate, GateKind};
use crate::error::{QagError, Result};

pub const MAX_QUBITS: usize = 12;

/// Single-qubit Pauli operator, used for noise injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_index(i: u8) -> Pauli {
        match i & 3 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }
}

/// Pure state over `n_qubits`; qubit `k` is bit `k` of the basis index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// |0...0>
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QagError::UnsupportedQubits(n_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amplitudes })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QagError::InvalidArgument(format!("amplitude length {len} is not 2^n")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(QagError::UnsupportedQubits(n_qubits));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(QagError::InvalidArgument(format!("state norm {norm} != 1")));
        }
        Ok(StateVector { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability that qubit `q` reads 0.
    pub fn prob_zero(&self, q: usize) -> f64 {
        let mask = 1usize << q;
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// Applies a gate in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        let t = gate.target;
        match gate.kind {
            GateKind::H => self.apply_real_1q(t, [[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]]),
            GateKind::Ry => {
                let (s, c) = (gate.angle / 2.0).sin_cos();
                self.apply_real_1q(t, [[c, -s], [s, c]]);
            }
            GateKind::Rz => {
                let (s, c) = (gate.angle / 2.0).sin_cos();
                let p0 = Complex64::new(c, -s);
                let p1 = Complex64::new(c, s);
                let mask = 1usize << t;
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if i & mask == 0 { p0 } else { p1 };
                }
            }
            GateKind::Cx => {
                let c = gate.control.expect("validated CX has control");
                let cmask = 1usize << c;
                let tmask = 1usize << t;
                for i in 0..self.amplitudes.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
        }
    }

    fn apply_real_1q(&mut self, q: usize, m: [[f64; 2]; 2]) {
        let mask = 1usize << q;
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                self.amplitudes[i] = a0 * m[0][0] + a1 * m[0][1];
                self.amplitudes[i | mask] = a0 * m[1][0] + a1 * m[1][1];
            }
        }
    }

    pub(crate) fn apply_pauli(&mut self, q: usize, p: Pauli) {
        let mask = 1usize << q;
        let i_unit = Complex64::new(0.0, 1.0);
        match p {
            Pauli::I => {}
            Pauli::X => {
                for i in 0..self.amplitudes.len() {
                    if i & mask == 0 {
                        self.amplitudes.swap(i, i | mask);
                    }
                }
            }
            Pauli::Y => {
                for i in 0..self.amplitudes.len() {
                    if i & mask == 0 {
                        let a0 = self.amplitudes[i];
                        let a1 = self.amplitudes[i | mask];
                        self.amplitudes[i] = -i_unit * a1;
                        self.amplitudes[i | mask] = i_unit * a0;
                    }
                }
            }
            Pauli::Z => {
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *a = -*a;
                    }
                }
            }
        }
    }

    /// Single-qubit purity Tr(rho_q^2) of the reduced state of qubit `q`.
    pub fn qubit_purity(&self, q: usize) -> f64 {
        let mask = 1usize << q;
        let (mut p0, mut p1) = (0.0, 0.0);
        let mut off = Complex64::new(0.0, 0.0);
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                p0 += a0.norm_sqr();
                p1 += a1.norm_sqr();
                off += a0 * a1.conj();
            }
        }
        p0 * p0 + p1 * p1 + 2.0 * off.norm_sqr()
    }
}

/// Returns the state after applying `gate`.
pub fn apply_gate(mut state: StateVector, gate: &Gate) -> Result<StateVector> {
    state.apply(gate)?;
    Ok(state)
}

/// Runs `circuit` with bound `params` on |0...0>.
pub fn run_circuit(circuit: &Circuit, params: &[f64]) -> Result<StateVector> {
    let state = StateVector::zero(circuit.n_qubits())?;
    run_circuit_from(state, circuit, params)
}

/// Runs `circuit` with bound `params` on a given initial state.
pub fn run_circuit_from(mut state: StateVector, circuit: &Circuit, params: &[f64]) -> Result<StateVector> {
    if state.n_qubits() != circuit.n_qubits() {
        return Err(QagError::DimensionMismatch { expected: circuit.n_qubits(), got: state.n_qubits() });
    }
    for gate in circuit.bind(params)? {
        state.apply_unchecked(&gate);
    }
    Ok(state)
}

/// Applies an already-bound gate list.
pub fn run_gates(mut state: StateVector, gates: &[Gate]) -> Result<StateVector> {
    for g in gates {
        state.apply(g)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_gate(StateVector::zero(1).unwrap(), &Gate::h(0)).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[1], FRAC_1_SQRT_2, 0.0));
    }

    #[test]
    fn ry_pi_flips() {
        let s = apply_gate(StateVector::zero(1).unwrap(), &Gate::ry(0, PI)).unwrap();
        assert!(close(s.amplitudes()[0], 0.0, 0.0));
        assert!(close(s.amplitudes()[1], 1.0, 0.0));
    }

    #[test]
    fn cx_truth_table() {
        // |10> in the usual left-to-right notation: qubit 0 set, index 0b01
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&Gate::ry(0, PI)).unwrap();
        s.apply(&Gate::cx(0, 1)).unwrap();
        assert!(close(s.amplitudes()[0b11], 1.0, 0.0));
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(2);
        let s = run_circuit(&c, &[]).unwrap();
        assert_eq!(s, StateVector::zero(2).unwrap());
    }

    #[test]
    fn bell_state() {
        let mut c = Circuit::new(2);
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::cx(0, 1)).unwrap();
        let s = run_circuit(&c, &[]).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[3], FRAC_1_SQRT_2, 0.0));
        assert!(s.amplitudes()[1].norm() < 1e-15 && s.amplitudes()[2].norm() < 1e-15);
    }

    #[test]
    fn errors() {
        let s = StateVector::zero(2).unwrap();
        assert!(matches!(apply_gate(s.clone(), &Gate::h(2)), Err(QagError::QubitOutOfRange { .. })));
        assert!(matches!(apply_gate(s.clone(), &Gate::ry(0, f64::NAN)), Err(QagError::NonFiniteAngle(_))));
        assert!(apply_gate(s.clone(), &Gate::cx(1, 1)).is_err());
        let mut c = Circuit::new(2);
        c.push_param(GateKind::Ry, 0).unwrap();
        assert!(matches!(run_circuit(&c, &[]), Err(QagError::ParamCount { expected: 1, got: 0 })));
        assert!(c.push_param(GateKind::H, 0).is_err());
        assert!(StateVector::zero(13).is_err());
    }

    #[test]
    fn pauli_y_matches_definition() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply_pauli(0, Pauli::Y);
        assert!(close(s.amplitudes()[1], 0.0, 1.0));
    }

    #[test]
    fn purity_of_bell_half_is_half() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&Gate::h(0)).unwrap();
        s.apply(&Gate::cx(0, 1)).unwrap();
        assert!((s.qubit_purity(0) - 0.5).abs() < 1e-12);
        assert!((s.qubit_purity(1) - 0.5).abs() < 1e-12);
    }
}
