//! Shower datasets: CSV I/O, summary statistics, splitting and a synthetic
//! generator with a Gamma-shaped longitudinal profile.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{QagError, Result};
use crate::objectives::pearson;
use crate::util::{pairwise_sum, rng_from_seed};

pub const N_PIXELS: usize = 8;
pub const DEFAULT_E_MAX: f64 = 0.6;
pub const DEFAULT_TRAIN_SIZE: usize = 1000;
pub const DEFAULT_TEST_SIZE: usize = 980;

/// Per-pixel mean and population standard deviation, plus the Pearson matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub pixel_mean: Vec<f64>,
    pub pixel_std: Vec<f64>,
    pub corr: Vec<Vec<f64>>,
}

impl DatasetStats {
    pub fn compute(samples: &[Vec<f64>]) -> Result<Self> {
        let d = samples.first().ok_or(QagError::EmptyBatch)?.len();
        let n = samples.len() as f64;
        let column = |j: usize| samples.iter().map(|s| s[j]).collect::<Vec<f64>>();
        let pixel_mean: Vec<f64> = (0..d).map(|j| pairwise_sum(&column(j)) / n).collect();
        let pixel_std: Vec<f64> = (0..d)
            .map(|j| {
                let m = pixel_mean[j];
                let sq: Vec<f64> = column(j).iter().map(|x| (x - m) * (x - m)).collect();
                (pairwise_sum(&sq) / n).sqrt()
            })
            .collect();
        let corr = if samples.len() >= 2 {
            pearson(samples)?.matrix
        } else {
            (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
        };
        Ok(DatasetStats { pixel_mean, pixel_std, corr })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    File { path: String },
    Synthetic { params: SynthParams, seed: u64 },
    Subset { of: Box<Provenance>, part: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShowerDataset {
    pub samples: Vec<Vec<f64>>,
    pub stats: DatasetStats,
    pub e_max: f64,
    pub provenance: Provenance,
}

impl ShowerDataset {
    /// Builds a dataset, clamping energies into [0, e_max] with a warning.
    pub fn from_samples(mut samples: Vec<Vec<f64>>, e_max: f64, provenance: Provenance) -> Result<Self> {
        let d = samples.first().ok_or(QagError::EmptyBatch)?.len();
        let mut clamped = 0usize;
        for (i, s) in samples.iter_mut().enumerate() {
            if s.len() != d {
                return Err(QagError::DimensionMismatch { expected: d, got: s.len() });
            }
            for x in s.iter_mut() {
                if !x.is_finite() {
                    return Err(QagError::MalformedData(format!("non-finite energy in sample {i}")));
                }
                if *x < 0.0 || *x > e_max {
                    *x = x.clamp(0.0, e_max);
                    clamped += 1;
                }
            }
        }
        if clamped > 0 {
            warn!("clamped {clamped} energies into [0, {e_max}]");
        }
        let stats = DatasetStats::compute(&samples)?;
        Ok(ShowerDataset { samples, stats, e_max, provenance })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_pixels(&self) -> usize {
        self.samples[0].len()
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(path, &self.samples)
    }
}

/// Writes a header `p0..p{d-1}` and one row per sample.
pub fn write_csv(path: impl AsRef<Path>, samples: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    write_rows(&mut w, samples)?;
    w.flush()?;
    Ok(())
}

pub fn csv_string(samples: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_rows(&mut w, samples)?;
    let bytes = w.into_inner().map_err(|e| QagError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_rows<W: std::io::Write>(w: &mut csv::Writer<W>, samples: &[Vec<f64>]) -> Result<()> {
    let d = samples.first().map_or(N_PIXELS, |s| s.len());
    w.write_record((0..d).map(|j| format!("p{j}")))?;
    for s in samples {
        w.write_record(s.iter().map(|x| x.to_string()))?;
    }
    Ok(())
}

/// Loads an 8-pixel CSV with a header row.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<ShowerDataset> {
    load_dataset_with(path, N_PIXELS, DEFAULT_E_MAX)
}

pub fn load_dataset_with(path: impl AsRef<Path>, n_pixels: usize, e_max: f64) -> Result<ShowerDataset> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header_len = r.headers()?.len();
    if header_len != n_pixels {
        return Err(QagError::MalformedData(format!("expected {n_pixels} columns, found {header_len}")));
    }
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| QagError::MalformedData(format!("row {}: {e}", i + 1)))?;
        if rec.len() != n_pixels {
            return Err(QagError::MalformedData(format!("row {} has {} columns", i + 1, rec.len())));
        }
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| QagError::MalformedData(format!("row {}: {e}", i + 1)))?;
        samples.push(row);
    }
    if samples.is_empty() {
        return Err(QagError::MalformedData("no data rows".into()));
    }
    ShowerDataset::from_samples(samples, e_max, Provenance::File { path: path.display().to_string() })
}

/// Disjoint shuffled train and test subsets.
pub fn split(dataset: &ShowerDataset, train_n: usize, test_n: usize, seed: u64) -> Result<(ShowerDataset, ShowerDataset)> {
    if train_n + test_n > dataset.len() {
        return Err(QagError::InsufficientSamples(format!(
            "{train_n} + {test_n} requested from {} samples",
            dataset.len()
        )));
    }
    if train_n == 0 || test_n == 0 {
        return Err(QagError::InvalidArgument("split sizes must be positive".into()));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let take = |r: &[usize]| r.iter().map(|&i| dataset.samples[i].clone()).collect::<Vec<_>>();
    let sub = |part: &str| Provenance::Subset { of: Box::new(dataset.provenance.clone()), part: part.into() };
    let train = ShowerDataset::from_samples(take(&idx[..train_n]), dataset.e_max, sub("train"))?;
    let test = ShowerDataset::from_samples(take(&idx[train_n..train_n + test_n]), dataset.e_max, sub("test"))?;
    Ok((train, test))
}

/// Seed of the built-in synthetic dataset.
pub const DEFAULT_DATA_SEED: u64 = 7;

/// Built-in train/test split: default synthetic parameters, 1000 training
/// and 980 test images, generated and shuffled with `seed`.
pub fn default_synthetic(seed: u64) -> Result<(ShowerDataset, ShowerDataset)> {
    let ds = synth_generate(&SynthParams::default(), seed)?;
    split(&ds, DEFAULT_TRAIN_SIZE, DEFAULT_TEST_SIZE, seed)
}

/// Parameters of the synthetic shower generator.
///
/// Each image is `sum_mean * profile + s * z` with `z ~ N(0, corr)` and
/// `s = sum_std / sqrt(1' corr 1)`, so the per-image energy sum is Gaussian
/// with mean `sum_mean` and deviation `sum_std`, and the pixel correlation
/// is `corr`. The profile is a Gamma density evaluated at pixel centres with
/// its mode on pixel `peak`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_samples: usize,
    pub peak: f64,
    pub shape: f64,
    pub sum_mean: f64,
    pub sum_std: f64,
    pub corr: Vec<Vec<f64>>,
    #[serde(default = "default_e_max")]
    pub e_max: f64,
}

fn default_e_max() -> f64 {
    DEFAULT_E_MAX
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_samples: 2000,
            peak: 2.0,
            shape: 2.5,
            sum_mean: 2.3,
            sum_std: 0.026,
            corr: default_corr(),
            e_max: DEFAULT_E_MAX,
        }
    }
}

/// A compact positively correlated core {1,2,3,4}, a weaker group
/// {0,5,6,7}, and negative correlation between the two.
pub fn default_corr() -> Vec<Vec<f64>> {
    let core = |i: usize| (1..=4).contains(&i);
    (0..N_PIXELS)
        .map(|i| {
            (0..N_PIXELS)
                .map(|j| match (i == j, core(i), core(j)) {
                    (true, _, _) => 1.0,
                    (false, true, true) => 0.5,
                    (false, false, false) => 0.3,
                    _ => -0.25,
                })
                .collect()
        })
        .collect()
}

impl SynthParams {
    /// Normalized longitudinal profile (sums to 1).
    pub fn profile(&self) -> Vec<f64> {
        let d = self.corr.len();
        let scale = (self.peak + 0.5) / (self.shape - 1.0);
        let raw: Vec<f64> = (0..d)
            .map(|i| {
                let x = i as f64 + 0.5;
                x.powf(self.shape - 1.0) * (-x / scale).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    /// Pixel means before clamping.
    pub fn analytic_means(&self) -> Vec<f64> {
        self.profile().into_iter().map(|f| f * self.sum_mean).collect()
    }

    /// Common per-pixel standard deviation before clamping.
    pub fn pixel_sigma(&self) -> f64 {
        let total: f64 = self.corr.iter().flatten().sum();
        if total <= 0.0 {
            0.0
        } else {
            self.sum_std / total.sqrt()
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::objectives::validate_correlation(&self.corr)?;
        if self.corr.is_empty() {
            return Err(QagError::InvalidArgument("empty correlation target".into()));
        }
        if !(self.shape > 1.0 && self.shape.is_finite()) {
            return Err(QagError::InvalidArgument(format!("shape {} must exceed 1", self.shape)));
        }
        if !(self.peak >= 0.0 && self.peak.is_finite()) {
            return Err(QagError::InvalidArgument(format!("peak {} must be >= 0", self.peak)));
        }
        if !(self.sum_mean > 0.0 && self.sum_std >= 0.0 && self.e_max > 0.0) {
            return Err(QagError::InvalidArgument("energy sum parameters must be positive".into()));
        }
        if self.sum_std > 0.0 && self.corr.iter().flatten().sum::<f64>() <= 0.0 {
            return Err(QagError::InvalidArgument("correlation target makes the sum deterministic".into()));
        }
        if self.n_samples == 0 {
            return Err(QagError::InvalidArgument("n_samples must be positive".into()));
        }
        Ok(())
    }
}

/// Symmetric square root `L` with `L L' = corr`; errors if `corr` is not PSD.
fn correlation_factor(corr: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = corr.len();
    let m = DMatrix::from_fn(d, d, |i, j| corr[i][j]);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
        return Err(QagError::NotPositiveSemidefinite);
    }
    let sqrt_l = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * sqrt_l)
}

pub fn synth_generate(params: &SynthParams, seed: u64) -> Result<ShowerDataset> {
    params.validate()?;
    let factor = correlation_factor(&params.corr)?;
    let d = params.corr.len();
    let means = params.analytic_means();
    let sigma = params.pixel_sigma();
    let mut rng = rng_from_seed(seed);
    let samples = (0..params.n_samples)
        .map(|_| {
            let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..d)
                .map(|i| {
                    let z: f64 = (0..d).map(|k| factor[(i, k)] * g[k]).sum();
                    means[i] + sigma * z
                })
                .collect()
        })
        .collect();
    ShowerDataset::from_samples(samples, params.e_max, Provenance::Synthetic { params: params.clone(), seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_rows() {
        let f = write("p0,p1,p2,p3,p4,p5,p6,p7\n0.1,0.2,0.3,0.4,0.5,0.4,0.3,0.2\n0.2,0.2,0.3,0.4,0.5,0.4,0.3,0.1\n");
        let d = load_dataset(f.path()).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.stats.pixel_mean[0] - 0.15).abs() < 1e-15);
        assert!((d.stats.pixel_std[0] - 0.05).abs() < 1e-15);
        assert_eq!(d.stats.pixel_std[1], 0.0);
    }

    #[test]
    fn rejects_wrong_columns_and_garbage() {
        let f = write("p0,p1,p2,p3,p4,p5,p6\n0.1,0.2,0.3,0.4,0.5,0.4,0.3\n");
        assert!(matches!(load_dataset(f.path()), Err(QagError::MalformedData(_))));
        let f = write("p0,p1,p2,p3,p4,p5,p6,p7\n0.1,x,0.3,0.4,0.5,0.4,0.3,0.2\n");
        assert!(load_dataset(f.path()).is_err());
        let f = write("p0,p1,p2,p3,p4,p5,p6,p7\n0.1,0.2,0.3\n");
        assert!(load_dataset(f.path()).is_err());
    }

    #[test]
    fn clamps_out_of_range() {
        let f = write("p0,p1,p2,p3,p4,p5,p6,p7\n-0.1,0.2,0.3,0.4,0.5,0.4,0.3,0.7\n");
        let d = load_dataset(f.path()).unwrap();
        assert_eq!(d.samples[0][0], 0.0);
        assert_eq!(d.samples[0][7], 0.6);
    }

    #[test]
    fn save_load_roundtrip() {
        let d = synth_generate(&SynthParams { n_samples: 50, ..Default::default() }, 1).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        d.save_csv(f.path()).unwrap();
        let back = load_dataset(f.path()).unwrap();
        for (a, b) in d.samples.iter().flatten().zip(back.samples.iter().flatten()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn split_sizes_and_errors() {
        let d = synth_generate(&SynthParams { n_samples: 2000, ..Default::default() }, 2).unwrap();
        let (tr, te) = split(&d, 1000, 980, 5).unwrap();
        assert_eq!((tr.len(), te.len()), (1000, 980));
        let (tr2, _) = split(&d, 1000, 980, 5).unwrap();
        assert_eq!(tr.samples, tr2.samples);
        assert!(matches!(split(&d, 1500, 1500, 5), Err(QagError::InsufficientSamples(_))));
    }

    #[test]
    fn zero_sum_std_fixes_sums() {
        let p = SynthParams { n_samples: 20, sum_std: 0.0, ..Default::default() };
        let d = synth_generate(&p, 3).unwrap();
        let sums: Vec<f64> = d.samples.iter().map(|s| s.iter().sum()).collect();
        assert!(sums.iter().all(|s| (s - sums[0]).abs() < 1e-12));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let p = SynthParams { n_samples: 30, ..Default::default() };
        assert_eq!(synth_generate(&p, 9).unwrap(), synth_generate(&p, 9).unwrap());
    }

    #[test]
    fn rejects_non_psd_target() {
        let mut p = SynthParams::default();
        for (i, j, v) in [(0, 1, 0.99), (0, 2, 0.99), (1, 2, -0.99)] {
            p.corr[i][j] = v;
            p.corr[j][i] = v;
        }
        assert!(matches!(synth_generate(&p, 1), Err(QagError::NotPositiveSemidefinite)));
    }

    #[test]
    fn default_profile_is_single_peaked_in_range() {
        let p = SynthParams::default();
        let m = p.analytic_means();
        let argmax = m.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax, 2);
        assert!(m.iter().all(|&x| x > 0.0 && x < p.e_max));
        assert!((m.iter().sum::<f64>() - p.sum_mean).abs() < 1e-12);
    }
}
