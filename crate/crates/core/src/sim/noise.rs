use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{QagError, Result};

/// Per-qubit readout flips and per-edge two-qubit depolarizing errors.
///
/// Serialized as `{"label", "readout_error": [..], "cx_error": {"c-t": p}}`.
/// Edges absent from `cx_error` are noiseless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseFile", into = "NoiseFull")]
pub struct NoiseModel {
    pub label: String,
    pub readout_error: Vec<f64>,
    pub cx_error: BTreeMap<(usize, usize), f64>,
}

#[derive(Serialize, Deserialize)]
struct NoiseFull {
    label: String,
    readout_error: Vec<f64>,
    cx_error: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NoiseFile {
    Full(NoiseFull),
    Scalar {
        readout: f64,
        cx: f64,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        n_qubits: Option<usize>,
    },
}

impl From<NoiseModel> for NoiseFull {
    fn from(m: NoiseModel) -> Self {
        NoiseFull {
            label: m.label,
            readout_error: m.readout_error,
            cx_error: m.cx_error.into_iter().map(|((c, t), p)| (format!("{c}-{t}"), p)).collect(),
        }
    }
}

impl TryFrom<NoiseFile> for NoiseModel {
    type Error = QagError;

    fn try_from(f: NoiseFile) -> Result<Self> {
        let model = match f {
            NoiseFile::Full(full) => {
                let mut cx_error = BTreeMap::new();
                for (key, p) in full.cx_error {
                    cx_error.insert(parse_edge(&key)?, p);
                }
                NoiseModel { label: full.label, readout_error: full.readout_error, cx_error }
            }
            NoiseFile::Scalar { readout, cx, label, n_qubits } => {
                let n = n_qubits.unwrap_or(8);
                let mut m = NoiseModel::uniform(n, readout, cx);
                if let Some(l) = label {
                    m.label = l;
                }
                m
            }
        };
        model.validate()?;
        Ok(model)
    }
}

fn parse_edge(key: &str) -> Result<(usize, usize)> {
    let bad = || QagError::InvalidNoise(format!("bad edge key '{key}', expected 'c-t'"));
    let (c, t) = key.split_once('-').ok_or_else(bad)?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    let t: usize = t.trim().parse().map_err(|_| bad())?;
    if c == t {
        return Err(bad());
    }
    Ok((c, t))
}

impl NoiseModel {
    pub fn noiseless(n_qubits: usize) -> Self {
        NoiseModel { label: "noiseless".into(), readout_error: vec![0.0; n_qubits], cx_error: BTreeMap::new() }
    }

    /// Same readout error on every qubit and the same CX error on every ordered edge.
    pub fn uniform(n_qubits: usize, readout: f64, cx: f64) -> Self {
        let mut cx_error = BTreeMap::new();
        if cx != 0.0 {
            for c in 0..n_qubits {
                for t in 0..n_qubits {
                    if c != t {
                        cx_error.insert((c, t), cx);
                    }
                }
            }
        }
        NoiseModel {
            label: format!("readout={readout},cx={cx}"),
            readout_error: vec![readout; n_qubits],
            cx_error,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| p.is_finite() && (0.0..=1.0).contains(&p);
        if let Some(p) = self.readout_error.iter().find(|&&p| !ok(p)) {
            return Err(QagError::InvalidNoise(format!("readout probability {p} outside [0,1]")));
        }
        if let Some(p) = self.cx_error.values().find(|&&p| !ok(p)) {
            return Err(QagError::InvalidNoise(format!("cx probability {p} outside [0,1]")));
        }
        if self.cx_error.keys().any(|(c, t)| c == t) {
            return Err(QagError::InvalidNoise("cx edge with control == target".into()));
        }
        Ok(())
    }

    pub fn readout(&self, q: usize) -> f64 {
        self.readout_error.get(q).copied().unwrap_or(0.0)
    }

    pub fn cx(&self, control: usize, target: usize) -> f64 {
        self.cx_error.get(&(control, target)).copied().unwrap_or(0.0)
    }

    pub fn is_noiseless(&self) -> bool {
        self.readout_error.iter().all(|&p| p == 0.0) && self.cx_error.values().all(|&p| p == 0.0)
    }

    pub fn mean_readout(&self) -> f64 {
        mean(&self.readout_error)
    }

    pub fn mean_cx(&self) -> f64 {
        mean(&self.cx_error.values().copied().collect::<Vec<_>>())
    }

    /// Sweep x-position: average of mean readout and mean CX error.
    pub fn level(&self) -> f64 {
        0.5 * (self.mean_readout() + self.mean_cx())
    }

    /// Parses JSON; the scalar form expands to `n_qubits` qubits.
    pub fn from_json_str(s: &str, n_qubits: usize) -> Result<Self> {
        let file: NoiseFile = serde_json::from_str(s)?;
        let file = match file {
            NoiseFile::Scalar { readout, cx, label, n_qubits: None } => {
                NoiseFile::Scalar { readout, cx, label, n_qubits: Some(n_qubits) }
            }
            other => other,
        };
        let model = NoiseModel::try_from(file)?;
        if model.readout_error.len() != n_qubits {
            return Err(QagError::InvalidNoise(format!(
                "readout_error has {} entries, circuit has {n_qubits} qubits",
                model.readout_error.len()
            )));
        }
        if let Some((c, t)) = model.cx_error.keys().find(|(c, t)| *c >= n_qubits || *t >= n_qubits) {
            return Err(QagError::InvalidNoise(format!("edge {c}-{t} outside {n_qubits} qubits")));
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>, n_qubits: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, n_qubits)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
