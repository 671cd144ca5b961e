//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Results cross the boundary as JSON strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use qag_core::circuits::{build_architecture, Architecture};
use qag_core::codec::{angle_to_energy, decode_angle, generate_images, EncodingConfig};
use qag_core::data::{default_synthetic, ShowerDataset, DEFAULT_DATA_SEED, N_PIXELS};
use qag_core::eval::{pixel_means, shower_shape_mse};
use qag_core::sim::NoiseModel;
use qag_core::train::{TrainConfig, TrainState, Trainer};

fn to_js<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn js_err(e: qag_core::error::QagError) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    count0: u64,
    theta: f64,
    energy: f64,
}

/// Decoded angle and energy for every possible `|0>` count at `shots`.
#[wasm_bindgen]
pub fn decode_curve(shots: u32) -> Result<String, JsError> {
    let shots = u64::from(shots.max(1));
    let cfg = EncodingConfig::new(vec![0.0]);
    let step = (shots / 256).max(1);
    let mut points = Vec::new();
    let mut c = 0;
    while c <= shots {
        let theta = decode_angle(c, shots).map_err(js_err)?;
        points.push(CurvePoint { count0: c, theta, energy: angle_to_energy(theta, &cfg) });
        c = if c == shots { shots + 1 } else { (c + step).min(shots) };
    }
    to_js(&points)
}

#[derive(Serialize)]
struct ArchInfo {
    name: String,
    n_params: usize,
    n_cx: usize,
    gates: Vec<String>,
}

/// Parameter counts and gate lists of the nine architectures.
#[wasm_bindgen]
pub fn architectures(n_qubits: u32) -> Result<String, JsError> {
    let mut out = Vec::new();
    for arch in Architecture::ALL {
        let spec = build_architecture(arch, n_qubits as usize).map_err(js_err)?;
        let gates = spec
            .gates()
            .iter()
            .map(|ins| {
                let g = &ins.gate;
                match g.control {
                    Some(c) => format!("CX({c},{})", g.target),
                    None => match ins.slot {
                        Some(p) => format!("{:?}(q{}, t{p})", g.kind, g.target),
                        None => format!("{:?}(q{})", g.kind, g.target),
                    },
                }
            })
            .collect();
        out.push(ArchInfo { name: arch.name(), n_params: spec.n_params, n_cx: spec.circuit.cx_count(), gates });
    }
    to_js(&out)
}

#[derive(Serialize)]
struct GenerateResult {
    epoch: usize,
    generated: Vec<f64>,
    reference: Vec<f64>,
    shape_mse: f64,
    images: Vec<Vec<f64>>,
}

/// MERA-up generator trained in the page on the built-in synthetic data.
#[wasm_bindgen]
pub struct Demo {
    train: ShowerDataset,
    test: ShowerDataset,
    cfg: TrainConfig,
    state: TrainState,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<Demo, JsError> {
        let (train, test) = default_synthetic(DEFAULT_DATA_SEED).map_err(js_err)?;
        let cfg = TrainConfig { seed: u64::from(seed), epochs: 0, ..TrainConfig::default() };
        let spec = build_architecture(Architecture::MERA_UP, N_PIXELS).map_err(js_err)?;
        let state = TrainState::initial(spec.n_params, cfg.seed);
        Ok(Demo { train, test, cfg, state })
    }

    pub fn epoch(&self) -> usize {
        self.state.epoch
    }

    /// Runs `epochs` more noiseless SPSA epochs; returns the per-epoch loss.
    pub fn train(&mut self, epochs: u32) -> Result<String, JsError> {
        let spec = build_architecture(Architecture::MERA_UP, N_PIXELS).map_err(js_err)?;
        let start = self.state.epoch;
        self.cfg.epochs = start + epochs as usize;
        let trainer = Trainer::new(&spec, &self.train, &self.cfg).map_err(js_err)?;
        self.state = trainer.run(std::mem::replace(&mut self.state, TrainState::initial(0, 0))).map_err(js_err)?;
        let losses: Vec<f64> = self.state.history[start..].iter().map(|r| r.total).collect();
        to_js(&losses)
    }

    /// Generates `n` images under uniform readout and CX error rates.
    pub fn generate(&self, n: u32, readout: f64, cx: f64, seed: u32) -> Result<String, JsError> {
        let spec = build_architecture(Architecture::MERA_UP, N_PIXELS).map_err(js_err)?;
        let trainer = Trainer::new(&spec, &self.train, &self.cfg).map_err(js_err)?;
        let noise = NoiseModel::uniform(N_PIXELS, readout, cx);
        noise.validate().map_err(js_err)?;
        let images = generate_images(&spec.circuit, &self.state.params, trainer.encoding(), n.max(1) as usize, &noise, u64::from(seed))
            .map_err(js_err)?;
        let result = GenerateResult {
            epoch: self.state.epoch,
            generated: pixel_means(&images).map_err(js_err)?,
            reference: pixel_means(&self.test.samples).map_err(js_err)?,
            shape_mse: shower_shape_mse(&images, &self.test.samples).map_err(js_err)?,
            images: images.into_iter().take(8).collect(),
        };
        to_js(&result)
    }
}
