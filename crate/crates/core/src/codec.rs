//! Angle encoding: randomized state preparation and decoding of per-qubit
//! zero counts into pixel energies.
//!
//! A qubit measured `c0` times in |0> out of `shots` gives the z-intersection
//! `I = 2 c0 / shots - 1`, the angle `theta = asin(I)` (zero at |+>) and the
//! energy `E = e_max / (2 theta_max) * (theta + theta_max)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{QagError, Result};
use crate::sim::{sample_counts_with_rng, Circuit, Gate, NoiseModel, StateVector};
use crate::util::{par_map, rng_from_seed};

pub const MAX_SHOTS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub n_pixels: usize,
    /// Per-pixel spread of the training energies, used directly as an angle scale.
    pub pixel_std: Vec<f64>,
    pub global_factor_range: (f64, f64),
    pub e_min: f64,
    pub e_max: f64,
    pub theta_max: f64,
    pub shots: u64,
    /// Apply H before the latent Ry. Off only for single-rotation calibration runs.
    #[serde(default = "default_true")]
    pub hadamard: bool,
}

fn default_true() -> bool {
    true
}

impl EncodingConfig {
    pub fn new(pixel_std: Vec<f64>) -> Self {
        EncodingConfig {
            n_pixels: pixel_std.len(),
            pixel_std,
            global_factor_range: (-0.25, 0.25),
            e_min: 0.0,
            e_max: 0.6,
            theta_max: FRAC_PI_2,
            shots: 512,
            hadamard: true,
        }
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = shots;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.e_min != 0.0 {
            return Err(QagError::InvalidArgument("e_min must be 0".into()));
        }
        if !(self.e_max > 0.0 && self.e_max.is_finite()) {
            return Err(QagError::InvalidArgument(format!("e_max {} must be positive", self.e_max)));
        }
        if !(self.theta_max > 0.0 && self.theta_max <= FRAC_PI_2) {
            return Err(QagError::InvalidArgument(format!("theta_max {} outside (0, pi/2]", self.theta_max)));
        }
        if self.shots == 0 || self.shots > MAX_SHOTS {
            return Err(QagError::InvalidArgument(format!("shots {} outside 1..={MAX_SHOTS}", self.shots)));
        }
        if self.pixel_std.len() != self.n_pixels {
            return Err(QagError::DimensionMismatch { expected: self.n_pixels, got: self.pixel_std.len() });
        }
        if self.pixel_std.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(QagError::InvalidArgument("pixel_std must be finite and >= 0".into()));
        }
        let (lo, hi) = self.global_factor_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(QagError::InvalidArgument("bad global factor range".into()));
        }
        Ok(())
    }
}

/// Latent angles of one generated image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDraw {
    pub omega: Vec<f64>,
    pub global_factor: f64,
}

impl LatentDraw {
    pub fn zero(n: usize) -> Self {
        LatentDraw { omega: vec![0.0; n], global_factor: 0.0 }
    }
}

/// `omega_i = u_i * pixel_std_i * g`, with `u_i ~ U[-1, 1]` and one shared `g`
/// per image drawn from the global factor range.
pub fn draw_latent<R: Rng + ?Sized>(cfg: &EncodingConfig, rng: &mut R) -> LatentDraw {
    let (lo, hi) = cfg.global_factor_range;
    let g = lo + (hi - lo) * rng.random::<f64>();
    let omega = cfg
        .pixel_std
        .iter()
        .map(|s| {
            let u = 2.0 * rng.random::<f64>() - 1.0;
            u * s * g
        })
        .collect();
    LatentDraw { omega, global_factor: g }
}

/// H followed by Ry(omega_i) on each qubit.
pub fn prepare_state_circuit(draw: &LatentDraw) -> Result<Vec<Gate>> {
    prepare_gates(draw, true)
}

fn prepare_gates(draw: &LatentDraw, hadamard: bool) -> Result<Vec<Gate>> {
    let mut gates = Vec::with_capacity(2 * draw.omega.len());
    for (q, &w) in draw.omega.iter().enumerate() {
        if !w.is_finite() {
            return Err(QagError::NonFiniteAngle(w));
        }
        if hadamard {
            gates.push(Gate::h(q));
        }
        gates.push(Gate::ry(q, w));
    }
    Ok(gates)
}

/// Decoded angle for one qubit.
pub fn decode_angle(count0: u64, shots: u64) -> Result<f64> {
    if shots == 0 {
        return Err(QagError::InvalidArgument("shots must be >= 1".into()));
    }
    if count0 > shots {
        return Err(QagError::CountsOutOfRange { counts: count0, shots });
    }
    let i = (2.0 * count0 as f64 / shots as f64 - 1.0).clamp(-1.0, 1.0);
    Ok(i.asin())
}

pub fn angle_to_energy(theta: f64, cfg: &EncodingConfig) -> f64 {
    (cfg.e_max / (2.0 * cfg.theta_max) * (theta + cfg.theta_max)).clamp(cfg.e_min, cfg.e_max)
}

/// Inverse of [`angle_to_energy`].
pub fn energy_to_angle(energy: f64, cfg: &EncodingConfig) -> f64 {
    energy * 2.0 * cfg.theta_max / cfg.e_max - cfg.theta_max
}

/// Decodes each qubit independently into a pixel energy in [e_min, e_max].
pub fn decode_counts(counts0: &[u64], shots: u64, cfg: &EncodingConfig) -> Result<Vec<f64>> {
    counts0.iter().map(|&c| Ok(angle_to_energy(decode_angle(c, shots)?, cfg))).collect()
}

/// Trainable circuit with bound parameters, ready to generate images.
#[derive(Debug, Clone)]
pub struct Generator<'a> {
    n_qubits: usize,
    gates: Vec<Gate>,
    cfg: &'a EncodingConfig,
}

impl<'a> Generator<'a> {
    pub fn new(circuit: &Circuit, params: &[f64], cfg: &'a EncodingConfig) -> Result<Self> {
        cfg.validate()?;
        if circuit.n_qubits() != cfg.n_pixels {
            return Err(QagError::DimensionMismatch { expected: cfg.n_pixels, got: circuit.n_qubits() });
        }
        Ok(Generator { n_qubits: circuit.n_qubits(), gates: circuit.bind(params)?, cfg })
    }

    /// One image for a given latent draw; shot sampling uses `rng`.
    pub fn image_for<R: Rng + ?Sized>(&self, draw: &LatentDraw, noise: &NoiseModel, rng: &mut R) -> Result<Vec<f64>> {
        if draw.omega.len() != self.n_qubits {
            return Err(QagError::DimensionMismatch { expected: self.n_qubits, got: draw.omega.len() });
        }
        let mut gates = prepare_gates(draw, self.cfg.hadamard)?;
        gates.extend_from_slice(&self.gates);
        let zero = StateVector::zero(self.n_qubits)?;
        let counts = sample_counts_with_rng(&zero, &gates, self.cfg.shots, noise, rng)?;
        decode_counts(&counts, self.cfg.shots, self.cfg)
    }

    /// Image `index` of the batch seeded by `seed`; its stream is `seed ^ index`.
    pub fn image(&self, index: usize, noise: &NoiseModel, seed: u64) -> Result<Vec<f64>> {
        let mut rng = rng_from_seed(seed ^ index as u64);
        let draw = draw_latent(self.cfg, &mut rng);
        self.image_for(&draw, noise, &mut rng)
    }

    pub fn images(&self, n_images: usize, noise: &NoiseModel, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n_images == 0 {
            return Err(QagError::InvalidArgument("n_images must be >= 1".into()));
        }
        par_map(n_images, |i| self.image(i, noise, seed)).into_iter().collect()
    }
}

/// Full pipeline: latent draw, preparation, circuit, noisy sampling, decoding.
pub fn generate_images(
    circuit: &Circuit,
    params: &[f64],
    cfg: &EncodingConfig,
    n_images: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    Generator::new(circuit, params, cfg)?.images(n_images, noise, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> EncodingConfig {
        EncodingConfig::new(vec![0.05; n])
    }

    #[test]
    fn decode_endpoints_and_midpoint() {
        let c = cfg(1);
        assert_eq!(decode_counts(&[512], 512, &c).unwrap(), vec![0.6]);
        assert_eq!(decode_counts(&[0], 512, &c).unwrap(), vec![0.0]);
        let mid = decode_counts(&[256], 512, &c).unwrap()[0];
        assert!((mid - 0.3).abs() < 1e-15);
        assert_eq!(decode_angle(256, 512).unwrap(), 0.0);
    }

    #[test]
    fn decode_errors() {
        let c = cfg(1);
        assert!(matches!(decode_counts(&[513], 512, &c), Err(QagError::CountsOutOfRange { .. })));
        assert!(decode_counts(&[0], 0, &c).is_err());
    }

    #[test]
    fn resolution_is_shots_plus_one() {
        let c = cfg(1);
        let shots = 512u64;
        let mut levels: Vec<f64> = (0..=shots).map(|k| decode_counts(&[k], shots, &c).unwrap()[0]).collect();
        assert!(levels.windows(2).all(|w| w[1] > w[0]));
        levels.dedup();
        assert_eq!(levels.len() as u64, shots + 1);
    }

    #[test]
    fn zero_omega_gives_plus_states() {
        let d = LatentDraw::zero(3);
        let g = prepare_state_circuit(&d).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], Gate::h(0));
        assert_eq!(g[1], Gate::ry(0, 0.0));
        assert!(prepare_state_circuit(&LatentDraw { omega: vec![f64::NAN], global_factor: 0.0 }).is_err());
    }

    #[test]
    fn zero_std_pixel_has_zero_angle() {
        let mut c = cfg(3);
        c.pixel_std[1] = 0.0;
        let mut rng = rng_from_seed(5);
        for _ in 0..100 {
            let d = draw_latent(&c, &mut rng);
            assert_eq!(d.omega[1].abs(), 0.0);
            assert!(d.global_factor.abs() <= 0.25);
        }
    }

    #[test]
    fn identity_circuit_gives_midpoint_energies() {
        let c = cfg(4).with_shots(100_000);
        let gen = Generator::new(&Circuit::new(4), &[], &c).unwrap();
        let mut rng = rng_from_seed(11);
        let img = gen.image_for(&LatentDraw::zero(4), &NoiseModel::noiseless(4), &mut rng).unwrap();
        for e in img {
            assert!((e - 0.3).abs() < 0.005, "{e}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let c = cfg(2);
        let circuit = Circuit::new(2);
        let a = generate_images(&circuit, &[], &c, 5, &NoiseModel::noiseless(2), 3).unwrap();
        let b = generate_images(&circuit, &[], &c, 5, &NoiseModel::noiseless(2), 3).unwrap();
        assert_eq!(a, b);
        assert!(generate_images(&circuit, &[], &c, 0, &NoiseModel::noiseless(2), 3).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(2);
        c.shots = 100_001;
        assert!(c.validate().is_err());
        let mut c = cfg(2);
        c.e_min = 0.1;
        assert!(c.validate().is_err());
    }
}
