//! SPSA training of the generator.
//!
//! Each epoch draws a random sign vector `delta`, evaluates the loss at
//! `theta + c delta` and `theta - c delta`, and steps
//! `theta -= lr(epoch) * (L+ - L-) / (2 c delta_i)`.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::circuits::{Architecture, CircuitSpec};
use crate::codec::{EncodingConfig, Generator};
use crate::data::ShowerDataset;
use crate::error::{QagError, Result};
use crate::objectives::{total_loss, LossComponents, LossWeights, MmdKernel, MmdReference, WeightSchedule};
use crate::sim::NoiseModel;
use crate::util::{derive_seed, mean, par_map, rng_from_seed, sample_std, sha256_hex};

const STREAM_INIT: u64 = 1;
const STREAM_DELTA: u64 = 2;
const STREAM_BATCH: u64 = 3;
const STREAM_REFERENCE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpsaConfig {
    /// Step size before decay.
    pub lr_c0: f64,
    pub lr_decay: f64,
    pub lr_decay_start: usize,
    /// Perturbation magnitude `c` in radians.
    pub perturbation: f64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        SpsaConfig { lr_c0: 1.0, lr_decay: 0.006, lr_decay_start: 50, perturbation: 0.1 }
    }
}

impl SpsaConfig {
    /// `c0` before `lr_decay_start`, then `c0 exp(-decay (epoch - start))`.
    pub fn lr(&self, epoch: usize) -> f64 {
        if epoch < self.lr_decay_start {
            self.lr_c0
        } else {
            self.lr_c0 * (-self.lr_decay * (epoch - self.lr_decay_start) as f64).exp()
        }
    }
}

/// Something an SPSA step can minimize.
pub trait LossValue {
    fn scalar(&self) -> f64;
}

impl LossValue for f64 {
    fn scalar(&self) -> f64 {
        *self
    }
}

impl LossValue for LossComponents {
    fn scalar(&self) -> f64 {
        self.total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpsaStep<T> {
    pub params: Vec<f64>,
    pub plus: T,
    pub minus: T,
    pub lr: f64,
    /// False when a loss was non-finite and the parameters were kept.
    pub updated: bool,
}

/// One SPSA update with exactly two loss evaluations.
pub fn spsa_step<T, F, R>(params: &[f64], epoch: usize, cfg: &SpsaConfig, rng: &mut R, mut loss_fn: F) -> Result<SpsaStep<T>>
where
    T: LossValue,
    F: FnMut(&[f64]) -> Result<T>,
    R: Rng + ?Sized,
{
    let c = cfg.perturbation;
    if !(c > 0.0 && c.is_finite()) {
        return Err(QagError::InvalidArgument(format!("perturbation {c} must be positive")));
    }
    let delta: Vec<f64> = (0..params.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let plus_p: Vec<f64> = params.iter().zip(&delta).map(|(p, d)| p + c * d).collect();
    let minus_p: Vec<f64> = params.iter().zip(&delta).map(|(p, d)| p - c * d).collect();
    let plus = loss_fn(&plus_p)?;
    let minus = loss_fn(&minus_p)?;
    let lr = cfg.lr(epoch);
    let diff = plus.scalar() - minus.scalar();
    if !diff.is_finite() {
        warn!("epoch {epoch}: non-finite loss, parameters kept");
        return Ok(SpsaStep { params: params.to_vec(), plus, minus, lr, updated: false });
    }
    let new_params = params.iter().zip(&delta).map(|(p, d)| p - lr * diff / (2.0 * c * d)).collect();
    Ok(SpsaStep { params: new_params, plus, minus, lr, updated: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// MMD against the whole training set.
    #[default]
    Full,
    /// MMD against a fresh training minibatch the size of the generated batch.
    Minibatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseChange {
    pub epoch: usize,
    pub model: NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_small: usize,
    pub batch_large: usize,
    pub batch_switch_epoch: usize,
    pub shots: u64,
    pub spsa: SpsaConfig,
    pub seed: u64,
    /// Active from epoch 0; `None` is noiseless.
    pub noise: Option<NoiseModel>,
    /// Models swapped in at the given epochs (calibration changes).
    pub noise_schedule: Vec<NoiseChange>,
    pub weight_schedule: WeightSchedule,
    pub reference: ReferenceMode,
    /// Reuse latent draws and shot streams for the +/- evaluations of an epoch.
    pub common_random_numbers: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_small: 1,
            batch_large: 20,
            batch_switch_epoch: 100,
            shots: 512,
            spsa: SpsaConfig::default(),
            seed: 0,
            noise: None,
            noise_schedule: Vec::new(),
            weight_schedule: WeightSchedule::FromStart,
            reference: ReferenceMode::Full,
            common_random_numbers: true,
        }
    }
}

impl TrainConfig {
    pub fn batch_size(&self, epoch: usize) -> usize {
        if epoch < self.batch_switch_epoch {
            self.batch_small
        } else {
            self.batch_large
        }
    }

    pub fn noise_at(&self, epoch: usize, n_qubits: usize) -> NoiseModel {
        self.noise_schedule
            .iter()
            .filter(|c| c.epoch <= epoch)
            .max_by_key(|c| c.epoch)
            .map(|c| c.model.clone())
            .or_else(|| self.noise.clone())
            .unwrap_or_else(|| NoiseModel::noiseless(n_qubits))
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_small == 0 || self.batch_large == 0 {
            return Err(QagError::InvalidArgument("batch sizes must be positive".into()));
        }
        if self.shots == 0 || self.shots > crate::codec::MAX_SHOTS {
            return Err(QagError::InvalidArgument(format!("shots {} out of range", self.shots)));
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        for c in &self.noise_schedule {
            c.model.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// Per-epoch record; the loss values average the two SPSA evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mmd_unweighted: f64,
    pub corr_unweighted: f64,
    pub w_mmd: f64,
    pub w_corr: f64,
    pub total: f64,
    pub lr: f64,
    pub updated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub params: Vec<f64>,
    /// Number of completed epochs.
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
    pub loss_evaluations: usize,
}

impl TrainState {
    /// Parameters drawn uniformly from [-pi, pi].
    pub fn initial(n_params: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(derive_seed(seed, STREAM_INIT, 0));
        let params = (0..n_params).map(|_| rng.random_range(-PI..=PI)).collect();
        TrainState { params, epoch: 0, history: Vec::new(), loss_evaluations: 0 }
    }
}

/// Loss history as CSV: epoch, unweighted parts, weights, weighted total.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,mmd_unweighted,corr_unweighted,w_mmd,w_corr,total\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch, r.mmd_unweighted, r.corr_unweighted, r.w_mmd, r.w_corr, r.total
        );
    }
    out
}

/// Everything needed to run or resume a training job.
pub struct Trainer<'a> {
    spec: &'a CircuitSpec,
    dataset: &'a ShowerDataset,
    cfg: &'a TrainConfig,
    encoding: EncodingConfig,
    full_reference: Option<MmdReference>,
}

impl<'a> Trainer<'a> {
    pub fn new(spec: &'a CircuitSpec, dataset: &'a ShowerDataset, cfg: &'a TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if dataset.n_pixels() != spec.n_qubits {
            return Err(QagError::DimensionMismatch { expected: spec.n_qubits, got: dataset.n_pixels() });
        }
        let mut encoding = EncodingConfig::new(dataset.stats.pixel_std.clone()).with_shots(cfg.shots);
        encoding.e_max = dataset.e_max;
        encoding.validate()?;
        let full_reference = match cfg.reference {
            ReferenceMode::Full => Some(MmdReference::new(dataset.samples.clone(), MmdKernel::new(dataset.e_max))?),
            ReferenceMode::Minibatch => None,
        };
        Ok(Trainer { spec, dataset, cfg, encoding, full_reference })
    }

    pub fn encoding(&self) -> &EncodingConfig {
        &self.encoding
    }

    fn reference_for(&self, epoch: usize, batch: usize) -> Result<MmdReference> {
        let mut rng = rng_from_seed(derive_seed(self.cfg.seed, STREAM_REFERENCE, epoch as u64));
        let samples = (0..batch)
            .map(|_| self.dataset.samples[rng.random_range(0..self.dataset.len())].clone())
            .collect();
        MmdReference::new(samples, MmdKernel::new(self.dataset.e_max))
    }

    /// Loss of `params` on a batch generated from `seed`.
    pub fn evaluate(
        &self,
        params: &[f64],
        epoch: usize,
        noise: &NoiseModel,
        reference: &MmdReference,
        seed: u64,
    ) -> Result<LossComponents> {
        let batch = self.cfg.batch_size(epoch);
        let gen = Generator::new(&self.spec.circuit, params, &self.encoding)?;
        let images = gen.images(batch, noise, seed)?;
        let weights = LossWeights::at(epoch, self.cfg.weight_schedule);
        total_loss(&images, reference, &self.dataset.stats.corr, weights)
    }

    /// Runs one epoch and appends its record.
    pub fn step(&self, state: &mut TrainState) -> Result<()> {
        let epoch = state.epoch;
        let noise = self.cfg.noise_at(epoch, self.spec.n_qubits);
        let batch = self.cfg.batch_size(epoch);
        let minibatch;
        let reference = match &self.full_reference {
            Some(r) => r,
            None => {
                minibatch = self.reference_for(epoch, batch)?;
                &minibatch
            }
        };
        let batch_seed = derive_seed(self.cfg.seed, STREAM_BATCH, epoch as u64);
        let mut calls = 0u64;
        let mut rng = rng_from_seed(derive_seed(self.cfg.seed, STREAM_DELTA, epoch as u64));
        let step = spsa_step(&state.params, epoch, &self.cfg.spsa, &mut rng, |p| {
            let seed = if self.cfg.common_random_numbers { batch_seed } else { derive_seed(batch_seed, 0, calls) };
            calls += 1;
            self.evaluate(p, epoch, &noise, reference, seed)
        })?;
        state.loss_evaluations += calls as usize;
        let avg = |f: fn(&LossComponents) -> f64| 0.5 * (f(&step.plus) + f(&step.minus));
        state.history.push(EpochRecord {
            epoch,
            mmd_unweighted: avg(|l| l.mmd),
            corr_unweighted: avg(|l| l.corr),
            w_mmd: step.plus.w_mmd,
            w_corr: step.plus.w_corr,
            total: avg(|l| l.total),
            lr: step.lr,
            updated: step.updated,
        });
        state.params = step.params;
        state.epoch += 1;
        Ok(())
    }

    /// Continues `state` until `cfg.epochs` epochs are complete.
    pub fn run(&self, mut state: TrainState) -> Result<TrainState> {
        if state.params.len() != self.spec.n_params {
            return Err(QagError::ParamCount { expected: self.spec.n_params, got: state.params.len() });
        }
        while state.epoch < self.cfg.epochs {
            self.step(&mut state)?;
        }
        Ok(state)
    }
}

/// Trains from the seeded initialization for `cfg.epochs` epochs.
pub fn train(spec: &CircuitSpec, dataset: &ShowerDataset, cfg: &TrainConfig) -> Result<TrainState> {
    let trainer = Trainer::new(spec, dataset, cfg)?;
    trainer.run(TrainState::initial(spec.n_params, cfg.seed))
}

/// Resumable training snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub architecture: Architecture,
    pub params: Vec<f64>,
    pub epoch: usize,
    /// Every random stream is derived from this seed and the epoch index.
    pub seed: u64,
    pub config_hash: String,
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    pub loss_evaluations: usize,
    /// Encoding used in training; lets the checkpoint generate on its own.
    #[serde(default)]
    pub encoding: Option<EncodingConfig>,
}

impl Checkpoint {
    pub fn new(architecture: Architecture, cfg: &TrainConfig, state: &TrainState) -> Self {
        Checkpoint {
            architecture,
            params: state.params.clone(),
            epoch: state.epoch,
            seed: cfg.seed,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            history: state.history.clone(),
            loss_evaluations: state.loss_evaluations,
            encoding: None,
        }
    }

    pub fn with_encoding(mut self, encoding: EncodingConfig) -> Self {
        self.encoding = Some(encoding);
        self
    }

    pub fn state(&self) -> TrainState {
        TrainState {
            params: self.params.clone(),
            epoch: self.epoch,
            history: self.history.clone(),
            loss_evaluations: self.loss_evaluations,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ck.config.hash() != ck.config_hash {
            return Err(QagError::InvalidArgument("checkpoint config hash mismatch".into()));
        }
        Ok(ck)
    }
}

/// Summary of repeated trials after discarding the extremes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub values: Vec<f64>,
    pub kept: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Seeds for `n` independent trials.
pub fn trial_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| derive_seed(base, 0x7121, i)).collect()
}

/// Runs `trial` once per seed (concurrently when enabled), drops the
/// `drop_extremes` lowest and highest results and summarizes the rest.
pub fn repeat_trials<F>(seeds: &[u64], drop_extremes: usize, trial: F) -> Result<TrialStats>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    if seeds.len() <= 2 * drop_extremes {
        return Err(QagError::InsufficientSamples(format!(
            "{} trials cannot drop {drop_extremes} from each end",
            seeds.len()
        )));
    }
    let values = par_map(seeds.len(), |i| trial(seeds[i])).into_iter().collect::<Result<Vec<f64>>>()?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let kept = sorted[drop_extremes..sorted.len() - drop_extremes].to_vec();
    Ok(TrialStats { mean: mean(&kept), std: sample_std(&kept), values, kept })
}
