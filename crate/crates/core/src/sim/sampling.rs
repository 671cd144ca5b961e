use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use super::gate::{Gate, GateKind};
use super::noise::NoiseModel;
use super::state::{Pauli, StateVector};
use crate::error::{QagError, Result};

/// Error injected after the CX at `gate` index: two-qubit Pauli index 1..=15,
/// high two bits on the control, low two bits on the target.
type Injection = (usize, u8);

/// Measures every qubit `shots` times and returns, per qubit, how often 0 was read.
///
/// `initial` is the prepared input state and `gates` the bound circuit. Noise
/// is sampled per shot: after each CX with edge error `p`, a uniformly random
/// non-identity two-qubit Pauli hits the pair with probability `p`; every
/// measured bit then flips with its qubit's readout error. Shots that share
/// the same injection pattern share one simulated trajectory.
pub fn sample_counts(
    initial: &StateVector,
    gates: &[Gate],
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_counts_with_rng(initial, gates, shots, noise, &mut rng)
}

pub fn sample_counts_with_rng<R: Rng + ?Sized>(
    initial: &StateVector,
    gates: &[Gate],
    shots: u64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(QagError::InvalidArgument("shots must be >= 1".into()));
    }
    let n = initial.n_qubits();
    if noise.readout_error.len() < n && noise.readout_error.iter().any(|&p| p != 0.0) {
        return Err(QagError::InvalidNoise(format!(
            "readout_error covers {} of {n} qubits",
            noise.readout_error.len()
        )));
    }
    noise.validate()?;
    for g in gates {
        g.validate(n)?;
    }

    let noisy_cx: Vec<(usize, f64)> = gates
        .iter()
        .enumerate()
        .filter(|(_, g)| g.kind == GateKind::Cx)
        .map(|(i, g)| (i, noise.cx(g.control.unwrap_or(0), g.target)))
        .filter(|&(_, p)| p > 0.0)
        .collect();

    let mut clean = initial.clone();
    let outcomes: Vec<usize> = if noisy_cx.is_empty() {
        for g in gates {
            clean.apply_unchecked(g);
        }
        let cdf = cumulative(&clean);
        (0..shots).map(|_| draw(&cdf, rng)).collect()
    } else {
        trajectory_outcomes(initial, gates, &noisy_cx, shots, rng)
    };

    let readout: Vec<f64> = (0..n).map(|q| noise.readout(q)).collect();
    let mut zeros = vec![0u64; n];
    for outcome in outcomes {
        for (q, z) in zeros.iter_mut().enumerate() {
            let mut bit = (outcome >> q) & 1 == 1;
            let p = readout[q];
            if p > 0.0 && rng.random::<f64>() < p {
                bit = !bit;
            }
            if !bit {
                *z += 1;
            }
        }
    }
    Ok(zeros)
}

fn trajectory_outcomes<R: Rng + ?Sized>(
    initial: &StateVector,
    gates: &[Gate],
    noisy_cx: &[(usize, f64)],
    shots: u64,
    rng: &mut R,
) -> Vec<usize> {
    let patterns: Vec<Vec<Injection>> = (0..shots)
        .map(|_| {
            noisy_cx
                .iter()
                .filter_map(|&(idx, p)| (rng.random::<f64>() < p).then(|| (idx, rng.random_range(1..16u8))))
                .collect()
        })
        .collect();

    // Clean snapshots after each noisy CX let faulty trajectories start at their first fault.
    let mut snapshots: BTreeMap<usize, StateVector> = BTreeMap::new();
    let mut state = initial.clone();
    for (i, g) in gates.iter().enumerate() {
        state.apply_unchecked(g);
        if noisy_cx.iter().any(|&(idx, _)| idx == i) {
            snapshots.insert(i, state.clone());
        }
    }
    let clean_cdf = cumulative(&state);

    let mut cdfs: BTreeMap<&[Injection], Vec<f64>> = BTreeMap::new();
    for pat in &patterns {
        if pat.is_empty() || cdfs.contains_key(pat.as_slice()) {
            continue;
        }
        let first = pat[0].0;
        let mut s = snapshots[&first].clone();
        let mut next = 0;
        for (i, g) in gates.iter().enumerate().skip(first) {
            if i > first {
                s.apply_unchecked(g);
            }
            while next < pat.len() && pat[next].0 == i {
                inject(&mut s, g, pat[next].1);
                next += 1;
            }
        }
        cdfs.insert(pat.as_slice(), cumulative(&s));
    }

    patterns
        .iter()
        .map(|pat| {
            let cdf = if pat.is_empty() { &clean_cdf } else { &cdfs[pat.as_slice()] };
            draw(cdf, rng)
        })
        .collect()
}

fn inject(state: &mut StateVector, gate: &Gate, pauli: u8) {
    let control = gate.control.expect("CX has control");
    state.apply_pauli(control, Pauli::from_index(pauli >> 2));
    state.apply_pauli(gate.target, Pauli::from_index(pauli & 3));
}

fn cumulative(state: &StateVector) -> Vec<f64> {
    let mut acc = 0.0;
    state
        .amplitudes()
        .iter()
        .map(|a| {
            acc += a.norm_sqr();
            acc
        })
        .collect()
}

fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let total = *cdf.last().expect("non-empty cdf");
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}
