//! Dense-matrix reference simulator used as an oracle.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qag_core::sim::{Gate, GateKind};

pub type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn single(kind: GateKind, angle: f64) -> CMat {
    let (s, co) = (angle / 2.0).sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::H => CMat::from_row_slice(2, 2, &[c(r), c(r), c(r), c(-r)]),
        GateKind::Ry => CMat::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)]),
        GateKind::Rz => CMat::from_row_slice(
            2,
            2,
            &[Complex64::new(co, -s), c(0.0), c(0.0), Complex64::new(co, s)],
        ),
        GateKind::Cx => panic!("two-qubit gate"),
    }
}

pub fn pauli(i: usize) -> CMat {
    let z = c(0.0);
    let one = c(1.0);
    let im = Complex64::new(0.0, 1.0);
    match i {
        0 => CMat::identity(2, 2),
        1 => CMat::from_row_slice(2, 2, &[z, one, one, z]),
        2 => CMat::from_row_slice(2, 2, &[z, -im, im, z]),
        _ => CMat::from_row_slice(2, 2, &[one, z, z, -one]),
    }
}

/// Kronecker product over qubits n-1..0 (qubit k is bit k of the index).
pub fn embed(n: usize, ops: &[(usize, CMat)]) -> CMat {
    let mut m = CMat::identity(1, 1);
    for q in (0..n).rev() {
        let op = ops.iter().find(|(k, _)| *k == q).map(|(_, m)| m.clone()).unwrap_or_else(|| CMat::identity(2, 2));
        m = m.kronecker(&op);
    }
    m
}

pub fn gate_matrix(n: usize, g: &Gate) -> CMat {
    match g.kind {
        GateKind::Cx => {
            let ctl = g.control.unwrap();
            let p0 = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
            let p1 = CMat::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
            embed(n, &[(ctl, p0)]) + embed(n, &[(ctl, p1), (g.target, pauli(1))])
        }
        k => embed(n, &[(g.target, single(k, g.angle))]),
    }
}

pub fn zero_state(n: usize) -> DVector<Complex64> {
    let mut v = DVector::from_element(1 << n, c(0.0));
    v[0] = c(1.0);
    v
}

pub fn dense_run(n: usize, gates: &[Gate]) -> DVector<Complex64> {
    let mut v = zero_state(n);
    for g in gates {
        v = gate_matrix(n, g) * v;
    }
    v
}
