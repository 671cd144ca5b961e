//! Noise sweeps: inference with a fixed trained model, and training under noise.

use serde::{Deserialize, Serialize};

use crate::circuits::CircuitSpec;
use crate::codec::{generate_images, EncodingConfig};
use crate::data::ShowerDataset;
use crate::error::{QagError, Result};
use crate::eval::shower_shape_mse;
use crate::sim::NoiseModel;
use crate::train::{repeat_trials, train, trial_seeds, TrainConfig, Trainer};
use crate::util::{derive_seed, mean, par_map, sample_std};

/// Default error levels, as fractions.
pub const DEFAULT_LEVELS: [f64; 10] = [0.0, 0.005, 0.01, 0.015, 0.02, 0.03, 0.05, 0.08, 0.10, 0.15];
pub const INFERENCE_IMAGES: usize = 20;
pub const INFERENCE_REPEATS: usize = 10;
pub const TRAINING_TRIALS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConfig {
    Readout,
    Cnot,
    Combined,
    /// A fixed model; the level grid is ignored.
    FromFile { label: String, model: NoiseModel },
}

impl NoiseConfig {
    pub fn name(&self) -> &str {
        match self {
            NoiseConfig::Readout => "readout",
            NoiseConfig::Cnot => "cnot",
            NoiseConfig::Combined => "combined",
            NoiseConfig::FromFile { label, .. } => label,
        }
    }

    /// `(x, model)` points. Grid configs sit at their nominal level; a file
    /// model sits at the mean of its average readout and CX errors.
    pub fn points(&self, levels: &[f64], n_qubits: usize) -> Vec<(f64, NoiseModel)> {
        let uniform = |r: f64, c: f64| NoiseModel::uniform(n_qubits, r, c);
        match self {
            NoiseConfig::Readout => levels.iter().map(|&l| (l, uniform(l, 0.0))).collect(),
            NoiseConfig::Cnot => levels.iter().map(|&l| (l, uniform(0.0, l))).collect(),
            NoiseConfig::Combined => levels.iter().map(|&l| (l, uniform(l, l))).collect(),
            NoiseConfig::FromFile { model, .. } => vec![(model.level(), model.clone())],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub noise_level: f64,
    pub config: String,
    pub mse_mean: f64,
    pub mse_std: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceSweep {
    pub n_images: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for InferenceSweep {
    fn default() -> Self {
        InferenceSweep { n_images: INFERENCE_IMAGES, repeats: INFERENCE_REPEATS, seed: 0 }
    }
}

/// Shower-shape MSE of small generated batches from fixed parameters.
///
/// Every point reuses the same repeat seeds, so curves differ only by noise.
pub fn inference_sweep(
    spec: &CircuitSpec,
    params: &[f64],
    encoding: &EncodingConfig,
    test: &ShowerDataset,
    configs: &[NoiseConfig],
    levels: &[f64],
    opts: &InferenceSweep,
) -> Result<Vec<SweepRow>> {
    if opts.repeats == 0 || opts.n_images == 0 {
        return Err(QagError::InvalidArgument("repeats and n_images must be positive".into()));
    }
    let points: Vec<(String, f64, NoiseModel)> = configs
        .iter()
        .flat_map(|c| c.points(levels, spec.n_qubits).into_iter().map(move |(x, m)| (c.name().to_string(), x, m)))
        .collect();
    par_map(points.len(), |i| {
        let (config, x, model) = &points[i];
        let mses = (0..opts.repeats)
            .map(|r| {
                let seed = derive_seed(opts.seed, 0x1f, r as u64);
                let imgs = generate_images(&spec.circuit, params, encoding, opts.n_images, model, seed)?;
                shower_shape_mse(&imgs, &test.samples)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(SweepRow { noise_level: *x, config: config.clone(), mse_mean: mean(&mses), mse_std: sample_std(&mses) })
    })
    .into_iter()
    .collect()
}

/// Trains once with `noise` active throughout and returns the shower-shape
/// MSE of `n_images` images generated under the same noise.
pub fn train_and_score(
    spec: &CircuitSpec,
    train_set: &ShowerDataset,
    test: &ShowerDataset,
    cfg: &TrainConfig,
    n_images: usize,
) -> Result<f64> {
    let state = train(spec, train_set, cfg)?;
    let trainer = Trainer::new(spec, train_set, cfg)?;
    let noise = cfg.noise_at(cfg.epochs, spec.n_qubits);
    let imgs = generate_images(&spec.circuit, &state.params, trainer.encoding(), n_images, &noise, derive_seed(cfg.seed, 0x2f, 0))?;
    shower_shape_mse(&imgs, &test.samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSweep {
    pub trials: usize,
    pub n_images: usize,
    pub seed: u64,
}

impl Default for TrainingSweep {
    fn default() -> Self {
        TrainingSweep { trials: TRAINING_TRIALS, n_images: crate::data::DEFAULT_TEST_SIZE, seed: 0 }
    }
}

/// Independent training trials at every noise point.
pub fn training_sweep(
    spec: &CircuitSpec,
    train_set: &ShowerDataset,
    test: &ShowerDataset,
    base: &TrainConfig,
    configs: &[NoiseConfig],
    levels: &[f64],
    opts: &TrainingSweep,
) -> Result<Vec<SweepRow>> {
    let seeds = trial_seeds(opts.seed, opts.trials);
    let mut rows = Vec::new();
    for c in configs {
        for (x, model) in c.points(levels, spec.n_qubits) {
            let stats = repeat_trials(&seeds, 0, |s| {
                let mut cfg = base.clone();
                cfg.seed = s;
                cfg.noise = Some(model.clone());
                cfg.noise_schedule.clear();
                train_and_score(spec, train_set, test, &cfg, opts.n_images)
            })?;
            rows.push(SweepRow { noise_level: x, config: c.name().to_string(), mse_mean: stats.mean, mse_std: stats.std });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let p = NoiseConfig::Readout.points(&[0.0, 0.08], 2);
        assert_eq!(p.len(), 2);
        assert_eq!(p[1].0, 0.08);
        assert_eq!(p[1].1.readout(1), 0.08);
        assert!(p[0].1.is_noiseless());
        let c = NoiseConfig::Combined.points(&[0.03], 2);
        assert_eq!(c[0].1.cx(0, 1), 0.03);
    }

    #[test]
    fn file_point_uses_average_of_readout_and_cx() {
        let mut m = NoiseModel::noiseless(8);
        m.readout_error[3] = 0.08;
        let p = NoiseConfig::FromFile { label: "q3".into(), model: m }.points(&DEFAULT_LEVELS, 8);
        assert_eq!(p.len(), 1);
        assert!((p[0].0 - 0.08 / 8.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![SweepRow { noise_level: 0.01, config: "cnot".into(), mse_mean: 1e-3, mse_std: 0.0 }];
        assert_eq!(sweep_csv(&rows), "noise_level,config,mse_mean,mse_std\n0.01,cnot,0.001,0.0\n");
        let quoted = vec![SweepRow { noise_level: 0.0, config: "a=1,b=2".into(), mse_mean: 0.5, mse_std: 0.0 }];
        assert!(sweep_csv(&quoted).contains("\"a=1,b=2\""));
    }
}
