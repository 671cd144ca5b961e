//! Training objectives: kernel MMD between image batches, the pixel
//! correlation loss, and the epoch-dependent weighting between them.

use serde::{Deserialize, Serialize};

use crate::error::{QagError, Result};
use crate::util::pairwise_sum;

/// Gaussian bandwidths of the MMD kernel mixture, on energies divided by e_max.
pub const MMD_BANDWIDTHS: [f64; 4] = [0.01, 0.1, 0.5, 1.0];

/// Epoch at which the correlation loss starts to receive weight.
pub const CORR_START_EPOCH: usize = 100;
pub const WEIGHT_DECAY_PER_EPOCH: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdKernel {
    pub bandwidths: Vec<f64>,
    /// Energies are divided by this before the kernel is applied.
    pub scale: f64,
}

impl MmdKernel {
    pub fn new(e_max: f64) -> Self {
        MmdKernel { bandwidths: MMD_BANDWIDTHS.to_vec(), scale: e_max }
    }

    fn eval_sq(&self, d2: f64) -> f64 {
        self.bandwidths.iter().map(|s| (-d2 / (2.0 * s * s)).exp()).sum()
    }

    fn k(&self, x: &[f64], y: &[f64]) -> f64 {
        let inv = 1.0 / (self.scale * self.scale);
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * inv;
        self.eval_sq(d2)
    }

    fn mean_gram(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let row_sums: Vec<f64> =
            a.iter().map(|x| pairwise_sum(&b.iter().map(|y| self.k(x, y)).collect::<Vec<_>>())).collect();
        pairwise_sum(&row_sums) / (a.len() * b.len()) as f64
    }
}

fn check_batch(batch: &[Vec<f64>], dim: Option<usize>) -> Result<usize> {
    let first = batch.first().ok_or(QagError::EmptyBatch)?;
    let d = dim.unwrap_or(first.len());
    if let Some(bad) = batch.iter().find(|v| v.len() != d) {
        return Err(QagError::DimensionMismatch { expected: d, got: bad.len() });
    }
    Ok(d)
}

/// Biased (V-statistic) squared MMD; defined for batches of size one.
pub fn mmd_loss(generated: &[Vec<f64>], reference: &[Vec<f64>], kernel: &MmdKernel) -> Result<f64> {
    let d = check_batch(generated, None)?;
    check_batch(reference, Some(d))?;
    let v = kernel.mean_gram(generated, generated) + kernel.mean_gram(reference, reference)
        - 2.0 * kernel.mean_gram(generated, reference);
    Ok(v.max(0.0))
}

/// MMD against a fixed reference set, with the reference-reference term cached.
#[derive(Debug, Clone)]
pub struct MmdReference {
    kernel: MmdKernel,
    samples: Vec<Vec<f64>>,
    self_term: f64,
}

impl MmdReference {
    pub fn new(samples: Vec<Vec<f64>>, kernel: MmdKernel) -> Result<Self> {
        check_batch(&samples, None)?;
        let self_term = kernel.mean_gram(&samples, &samples);
        Ok(MmdReference { kernel, samples, self_term })
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn kernel(&self) -> &MmdKernel {
        &self.kernel
    }

    pub fn loss(&self, generated: &[Vec<f64>]) -> Result<f64> {
        check_batch(generated, Some(self.samples[0].len()))?;
        let v = self.kernel.mean_gram(generated, generated) + self.self_term
            - 2.0 * self.kernel.mean_gram(generated, &self.samples);
        Ok(v.max(0.0))
    }
}

/// Pearson correlation matrix of a batch. Pixels with zero variance get zero
/// off-diagonal entries and are listed in `zero_variance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub matrix: Vec<Vec<f64>>,
    pub zero_variance: Vec<usize>,
}

pub fn pearson(batch: &[Vec<f64>]) -> Result<Correlation> {
    let d = check_batch(batch, None)?;
    if batch.len() < 2 {
        return Err(QagError::InvalidArgument("correlation needs at least 2 samples".into()));
    }
    let n = batch.len() as f64;
    let means: Vec<f64> = (0..d).map(|j| pairwise_sum(&batch.iter().map(|v| v[j]).collect::<Vec<_>>()) / n).collect();
    let centered: Vec<Vec<f64>> =
        batch.iter().map(|v| v.iter().zip(&means).map(|(x, m)| x - m).collect()).collect();
    let cov = |i: usize, j: usize| pairwise_sum(&centered.iter().map(|c| c[i] * c[j]).collect::<Vec<_>>()) / n;
    let var: Vec<f64> = (0..d).map(|i| cov(i, i)).collect();
    let zero_variance: Vec<usize> =
        (0..d).filter(|&i| var[i] <= 1e-28 * (1.0 + means[i] * means[i])).collect();
    let mut matrix = vec![vec![0.0; d]; d];
    for i in 0..d {
        matrix[i][i] = 1.0;
        for j in (i + 1)..d {
            let r = if zero_variance.contains(&i) || zero_variance.contains(&j) {
                0.0
            } else {
                (cov(i, j) / (var[i] * var[j]).sqrt()).clamp(-1.0, 1.0)
            };
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    Ok(Correlation { matrix, zero_variance })
}

pub fn validate_correlation(m: &[Vec<f64>]) -> Result<()> {
    let d = m.len();
    for (i, row) in m.iter().enumerate() {
        if row.len() != d {
            return Err(QagError::DimensionMismatch { expected: d, got: row.len() });
        }
        if (row[i] - 1.0).abs() > 1e-9 {
            return Err(QagError::InvalidArgument(format!("correlation diagonal {i} is {}", row[i])));
        }
        for j in 0..d {
            if (row[j] - m[j][i]).abs() > 1e-9 || !row[j].is_finite() {
                return Err(QagError::InvalidArgument("correlation matrix not symmetric".into()));
            }
        }
    }
    Ok(())
}

/// Mean squared difference over all d*d entries.
pub fn matrix_mse(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let sq: Vec<f64> =
        a.iter().zip(b).flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y))).collect();
    pairwise_sum(&sq) / sq.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrLoss {
    pub value: f64,
    /// Set when some generated pixel had zero variance.
    pub degenerate: bool,
}

/// MSE between the generated batch's Pearson matrix and `reference_corr`.
pub fn corr_loss(generated: &[Vec<f64>], reference_corr: &[Vec<f64>]) -> Result<CorrLoss> {
    validate_correlation(reference_corr)?;
    let d = check_batch(generated, Some(reference_corr.len()))?;
    debug_assert_eq!(d, reference_corr.len());
    let c = pearson(generated)?;
    Ok(CorrLoss { value: matrix_mse(&c.matrix, reference_corr), degenerate: !c.zero_variance.is_empty() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum WeightSchedule {
    /// `w_mmd = 1 - 0.001 (epoch - 100)`: continuous at epoch 100.
    #[default]
    FromStart,
    /// `w_mmd = 1 - 0.001 epoch`: jumps to 0.9 at epoch 100.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_mmd: f64,
    pub w_corr: f64,
    pub epoch: usize,
}

impl LossWeights {
    pub fn at(epoch: usize, schedule: WeightSchedule) -> Self {
        if epoch < CORR_START_EPOCH {
            return LossWeights { w_mmd: 1.0, w_corr: 0.0, epoch };
        }
        let elapsed = match schedule {
            WeightSchedule::FromStart => epoch - CORR_START_EPOCH,
            WeightSchedule::Absolute => epoch,
        };
        let w_mmd = (1.0 - WEIGHT_DECAY_PER_EPOCH * elapsed as f64).max(0.0);
        LossWeights { w_mmd, w_corr: 1.0 - w_mmd, epoch }
    }
}

/// Weighted total and the unweighted parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub mmd: f64,
    pub corr: f64,
    pub w_mmd: f64,
    pub w_corr: f64,
    pub total: f64,
}

/// `w_mmd * MMD + w_corr * Corr`; Corr is not evaluated while its weight is 0.
pub fn total_loss(
    generated: &[Vec<f64>],
    reference: &MmdReference,
    reference_corr: &[Vec<f64>],
    weights: LossWeights,
) -> Result<LossComponents> {
    let mmd = reference.loss(generated)?;
    let corr = if weights.w_corr == 0.0 { 0.0 } else { corr_loss(generated, reference_corr)?.value };
    Ok(LossComponents {
        mmd,
        corr,
        w_mmd: weights.w_mmd,
        w_corr: weights.w_corr,
        total: weights.w_mmd * mmd + weights.w_corr * corr,
    })
}
