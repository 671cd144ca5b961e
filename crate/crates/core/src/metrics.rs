//! Characteristic circuit numbers: parameter count, expressibility and
//! entanglement capability.
//!
//! Expressibility compares the histogram of pairwise state fidelities under
//! uniformly random parameters with the Haar law
//! `P(F) = (N - 1)(1 - F)^(N - 2)`, `N = 2^n`, via the KL divergence `D`, and
//! reports `1 - D`. Entanglement capability is the mean Meyer-Wallach measure
//! `Q = 2 (1 - mean_k Tr rho_k^2)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::circuits::{build_architecture, Architecture, CircuitSpec};
use crate::error::{QagError, Result};
use crate::sim::{run_circuit, Circuit, StateVector};
use crate::util::{derive_seed, mean, pairwise_sum, par_map, rng_from_seed, sample_std};

pub const DEFAULT_BINS: usize = 75;
/// Observed probability assigned to empty histogram bins.
pub const EMPTY_BIN_REGULARIZER: f64 = 1e-9;

const STREAM_EXPR: u64 = 0xE7;
const STREAM_ENT: u64 = 0xE8;
const JACKKNIFE_GROUPS: usize = 10;

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn random_params(circuit: &Circuit, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..circuit.n_params()).map(|_| rng.random::<f64>() * TAU).collect()
}

fn random_state(circuit: &Circuit, seed: u64) -> Result<StateVector> {
    run_circuit(circuit, &random_params(circuit, seed))
}

/// Haar fidelity mass of each of `n_bins` equal bins on [0, 1], in log space.
fn haar_log_bin_probs(n_qubits: usize, n_bins: usize) -> Vec<f64> {
    let dim_m1 = ((1u64 << n_qubits) - 1) as f64;
    (0..n_bins)
        .map(|b| {
            let lo = b as f64 / n_bins as f64;
            let hi = (b + 1) as f64 / n_bins as f64;
            // (1-lo)^(N-1) - (1-hi)^(N-1) = e^a (1 - e^(c-a))
            let a = dim_m1 * (1.0 - lo).ln();
            let c = if b + 1 == n_bins { f64::NEG_INFINITY } else { dim_m1 * (1.0 - hi).ln() };
            a + (-(c - a).exp()).ln_1p()
        })
        .collect()
}

fn kl_to_haar(fidelities: &[f64], log_q: &[f64]) -> f64 {
    let n_bins = log_q.len();
    let mut counts = vec![0usize; n_bins];
    for &f in fidelities {
        let b = ((f * n_bins as f64) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let total = fidelities.len() as f64;
    let terms: Vec<f64> = counts
        .iter()
        .zip(log_q)
        .map(|(&c, &lq)| {
            let p = if c == 0 { EMPTY_BIN_REGULARIZER } else { c as f64 / total };
            p * (p.ln() - lq)
        })
        .collect();
    pairwise_sum(&terms)
}

/// Expressibility score `1 - KL(P_circuit || P_Haar)`; at most 1.
///
/// The standard error comes from a delete-one-group jackknife.
pub fn expressibility_score(circuit: &Circuit, n_pairs: usize, n_bins: usize, seed: u64) -> Result<Estimate> {
    if n_pairs < 1000 {
        return Err(QagError::InvalidArgument(format!("n_pairs {n_pairs} < 1000")));
    }
    if n_bins < 10 {
        return Err(QagError::InvalidArgument(format!("n_bins {n_bins} < 10")));
    }
    let fidelities = par_map(n_pairs, |i| -> Result<f64> {
        let a = random_state(circuit, derive_seed(seed, STREAM_EXPR, 2 * i as u64))?;
        let b = random_state(circuit, derive_seed(seed, STREAM_EXPR, 2 * i as u64 + 1))?;
        Ok(a.inner(&b).norm_sqr().clamp(0.0, 1.0))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let log_q = haar_log_bin_probs(circuit.n_qubits(), n_bins);
    let full = 1.0 - kl_to_haar(&fidelities, &log_q);

    let g = JACKKNIFE_GROUPS as f64;
    let partial: Vec<f64> = (0..JACKKNIFE_GROUPS)
        .map(|k| {
            let rest: Vec<f64> = fidelities
                .iter()
                .enumerate()
                .filter(|(i, _)| i % JACKKNIFE_GROUPS != k)
                .map(|(_, &f)| f)
                .collect();
            1.0 - kl_to_haar(&rest, &log_q)
        })
        .collect();
    let pm = mean(&partial);
    let var = (g - 1.0) / g * partial.iter().map(|x| (x - pm) * (x - pm)).sum::<f64>();
    Ok(Estimate { value: full, std_error: var.sqrt() })
}

/// Meyer-Wallach entanglement of a state, in [0, 1].
pub fn meyer_wallach(state: &StateVector) -> f64 {
    let n = state.n_qubits();
    let purity: Vec<f64> = (0..n).map(|q| state.qubit_purity(q)).collect();
    let q = 2.0 * (1.0 - pairwise_sum(&purity) / n as f64);
    q.clamp(0.0, 1.0)
}

/// Mean Meyer-Wallach measure over `n_samples` uniformly random parameter vectors.
pub fn entanglement_capability(circuit: &Circuit, n_samples: usize, seed: u64) -> Result<Estimate> {
    if n_samples < 1000 {
        return Err(QagError::InvalidArgument(format!("n_samples {n_samples} < 1000")));
    }
    let values = par_map(n_samples, |i| -> Result<f64> {
        Ok(meyer_wallach(&random_state(circuit, derive_seed(seed, STREAM_ENT, i as u64))?))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate { value: mean(&values), std_error: sample_std(&values) / (n_samples as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub n_pairs: usize,
    pub n_bins: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { n_pairs: 5000, n_bins: DEFAULT_BINS, n_samples: 5000, seed: 2022 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitReport {
    pub name: Architecture,
    pub n_params: usize,
    pub expr_score: f64,
    pub expr_std_error: f64,
    pub ent_capability: f64,
    pub ent_std_error: f64,
    pub config: MetricsConfig,
}

pub fn circuit_report(spec: &CircuitSpec, cfg: &MetricsConfig) -> Result<CircuitReport> {
    let expr = expressibility_score(&spec.circuit, cfg.n_pairs, cfg.n_bins, cfg.seed)?;
    let ent = entanglement_capability(&spec.circuit, cfg.n_samples, cfg.seed)?;
    Ok(CircuitReport {
        name: spec.name,
        n_params: spec.n_params,
        expr_score: expr.value,
        expr_std_error: expr.std_error,
        ent_capability: ent.value,
        ent_std_error: ent.std_error,
        config: *cfg,
    })
}

/// Reports for all nine architectures at `n_qubits`, in table order.
pub fn full_report(n_qubits: usize, cfg: &MetricsConfig) -> Result<Vec<CircuitReport>> {
    Architecture::ALL
        .iter()
        .map(|&a| circuit_report(&build_architecture(a, n_qubits)?, cfg))
        .collect()
}
