//! Accuracy metrics comparing generated shower images with reference data.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{QagError, Result};
use crate::objectives::{matrix_mse, pearson};
use crate::util::{pairwise_sum, rng_from_seed};

pub const HIST_BINS: usize = 25;
pub const N_CLUSTERS: usize = 4;
const MAX_LLOYD_ITERS: usize = 300;

fn check(batch: &[Vec<f64>]) -> Result<usize> {
    let d = batch.first().ok_or(QagError::EmptyBatch)?.len();
    if let Some(v) = batch.iter().find(|v| v.len() != d) {
        return Err(QagError::DimensionMismatch { expected: d, got: v.len() });
    }
    Ok(d)
}

fn check_pair(gen: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<usize> {
    let d = check(gen)?;
    let dr = check(reference)?;
    if d != dr {
        return Err(QagError::DimensionMismatch { expected: dr, got: d });
    }
    Ok(d)
}

pub fn pixel_means(batch: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = check(batch)?;
    Ok((0..d)
        .map(|j| pairwise_sum(&batch.iter().map(|v| v[j]).collect::<Vec<_>>()) / batch.len() as f64)
        .collect())
}

/// MSE between the per-pixel mean images of the two batches.
pub fn shower_shape_mse(gen: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    check_pair(gen, reference)?;
    let a = pixel_means(gen)?;
    let b = pixel_means(reference)?;
    let sq: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).collect();
    Ok(pairwise_sum(&sq) / sq.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMetric {
    pub gen: Vec<Vec<f64>>,
    pub reference: Vec<Vec<f64>>,
    pub corr_mse: f64,
    /// Fraction of all d*d entries whose signs (-, 0, +) agree.
    pub sign_agreement: f64,
    pub gen_zero_variance: Vec<usize>,
    pub ref_zero_variance: Vec<usize>,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn correlation_metric(gen: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<CorrelationMetric> {
    check_pair(gen, reference)?;
    let g = pearson(gen)?;
    let r = pearson(reference)?;
    let total = g.matrix.len() * g.matrix.len();
    let agree = g
        .matrix
        .iter()
        .flatten()
        .zip(r.matrix.iter().flatten())
        .filter(|(a, b)| sign(**a) == sign(**b))
        .count();
    Ok(CorrelationMetric {
        corr_mse: matrix_mse(&g.matrix, &r.matrix),
        sign_agreement: agree as f64 / total as f64,
        gen: g.matrix,
        reference: r.matrix,
        gen_zero_variance: g.zero_variance,
        ref_zero_variance: r.zero_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Uniform bins on [lo, hi]; values outside are clamped into the end bins.
    pub fn new(values: impl IntoIterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(QagError::InvalidArgument(format!("bad histogram range [{lo}, {hi}] x {bins}")));
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|b| lo + b as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for v in values {
            let b = ((v - lo) / width).floor();
            let b = if b.is_nan() { 0 } else { (b.max(0.0) as usize).min(bins - 1) };
            counts[b] += 1;
        }
        Ok(Histogram { edges, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Intersection of the two normalized histograms, in [0, 1].
    pub fn overlap(&self, other: &Histogram) -> f64 {
        let (ta, tb) = (self.total() as f64, other.total() as f64);
        if ta == 0.0 || tb == 0.0 {
            return 0.0;
        }
        let mins: Vec<f64> =
            self.counts.iter().zip(&other.counts).map(|(&a, &b)| (a as f64 / ta).min(b as f64 / tb)).collect();
        pairwise_sum(&mins).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySumStats {
    pub mean: f64,
    /// Population standard deviation of the per-image sums.
    pub std: f64,
    pub histogram: Histogram,
}

/// Statistics of per-image energy sums; the histogram spans [0, hist_max].
pub fn energy_sum_stats(batch: &[Vec<f64>], hist_max: f64) -> Result<EnergySumStats> {
    check(batch)?;
    let sums: Vec<f64> = batch.iter().map(|v| pairwise_sum(v)).collect();
    let n = sums.len() as f64;
    let mean = pairwise_sum(&sums) / n;
    let sq: Vec<f64> = sums.iter().map(|s| (s - mean) * (s - mean)).collect();
    let std = (pairwise_sum(&sq) / n).sqrt();
    let histogram = Histogram::new(sums.iter().copied(), 0.0, hist_max, HIST_BINS)?;
    Ok(EnergySumStats { mean, std, histogram })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelHistograms {
    pub gen: Vec<Histogram>,
    pub reference: Vec<Histogram>,
    pub overlap: Vec<f64>,
}

/// Per-pixel histograms on shared bins over [0, e_max] and their overlaps.
pub fn per_pixel_histograms(gen: &[Vec<f64>], reference: &[Vec<f64>], e_max: f64, bins: usize) -> Result<PixelHistograms> {
    let d = check_pair(gen, reference)?;
    let hist = |batch: &[Vec<f64>], j: usize| Histogram::new(batch.iter().map(|v| v[j]), 0.0, e_max, bins);
    let g = (0..d).map(|j| hist(gen, j)).collect::<Result<Vec<_>>>()?;
    let r = (0..d).map(|j| hist(reference, j)).collect::<Result<Vec<_>>>()?;
    let overlap = g.iter().zip(&r).map(|(a, b)| a.overlap(b)).collect();
    Ok(PixelHistograms { gen: g, reference: r, overlap })
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    /// Sorted by descending first-pixel energy.
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index of each input point, in input order.
    pub assignments: Vec<usize>,
    /// Sum of squared distances after seeding and after each Lloyd iteration.
    pub objective_history: Vec<f64>,
}

impl KMeans {
    pub fn inertia(&self) -> f64 {
        *self.objective_history.last().expect("history is never empty")
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

fn assign(points: &[&Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut total = Vec::with_capacity(points.len());
    let labels = points
        .iter()
        .map(|p| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(c, m)| (c, dist2(p, m)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("k >= 1");
            total.push(d);
            best
        })
        .collect();
    (labels, pairwise_sum(&total))
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Points are put in lexicographic order first, so the result does not depend
/// on the order of `batch`.
pub fn kmeans_modes(batch: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    let d = check(batch)?;
    if k == 0 {
        return Err(QagError::InvalidArgument("k must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&batch[a], &batch[b]));
    let points: Vec<&Vec<f64>> = order.iter().map(|&i| &batch[i]).collect();
    let distinct = 1 + points.windows(2).filter(|w| lex_cmp(w[0], w[1]).is_ne()).count();
    if distinct < k {
        return Err(QagError::InsufficientSamples(format!("{distinct} distinct points for k = {k}")));
    }

    let mut rng = rng_from_seed(seed);
    let mut centroids: Vec<Vec<f64>> = vec![points[rng.random_range(0..points.len())].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total = pairwise_sum(&nearest);
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &w) in nearest.iter().enumerate() {
            if w > 0.0 {
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
        }
        let c = points[pick.expect("distinct points remain")].clone();
        for (n, p) in nearest.iter_mut().zip(&points) {
            *n = n.min(dist2(p, &c));
        }
        centroids.push(c);
    }

    let (mut labels, obj) = assign(&points, &centroids);
    let mut history = vec![obj];
    for _ in 0..MAX_LLOYD_ITERS {
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for (j, x) in centroid.iter_mut().enumerate() {
                *x = pairwise_sum(&members.iter().map(|p| p[j]).collect::<Vec<_>>()) / members.len() as f64;
            }
        }
        let (next, obj) = assign(&points, &centroids);
        history.push(obj);
        if next == labels {
            break;
        }
        labels = next;
    }

    let mut rank: Vec<usize> = (0..k).collect();
    rank.sort_by(|&a, &b| centroids[b][0].total_cmp(&centroids[a][0]).then(lex_cmp(&centroids[a], &centroids[b])));
    let mut new_index = vec![0; k];
    for (new, &old) in rank.iter().enumerate() {
        new_index[old] = new;
    }
    let mut assignments = vec![0; batch.len()];
    for (pos, &orig) in order.iter().enumerate() {
        assignments[orig] = new_index[labels[pos]];
    }
    debug_assert_eq!(centroids[0].len(), d);
    Ok(KMeans { centroids: rank.iter().map(|&i| centroids[i].clone()).collect(), assignments, objective_history: history })
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// Returns `row -> column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials formulation; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterComparison {
    pub gen: Vec<Vec<f64>>,
    pub reference: Vec<Vec<f64>>,
    /// `pairing[i]` is the reference cluster matched to generated cluster `i`.
    pub pairing: Vec<usize>,
    /// Euclidean distance of each matched pair.
    pub distances: Vec<f64>,
}

pub fn compare_clusters(gen: &[Vec<f64>], reference: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterComparison> {
    check_pair(gen, reference)?;
    let g = kmeans_modes(gen, k, seed)?.centroids;
    let r = kmeans_modes(reference, k, seed)?.centroids;
    let cost: Vec<Vec<f64>> = g.iter().map(|a| r.iter().map(|b| dist2(a, b).sqrt()).collect()).collect();
    let pairing = hungarian(&cost);
    let distances = pairing.iter().enumerate().map(|(i, &j)| cost[i][j]).collect();
    Ok(ClusterComparison { gen: g, reference: r, pairing, distances })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_gen: usize,
    pub n_ref: usize,
    pub shape_gen: Vec<f64>,
    pub shape_ref: Vec<f64>,
    pub shape_mse: f64,
    pub correlation: CorrelationMetric,
    pub esum_gen: EnergySumStats,
    pub esum_ref: EnergySumStats,
    pub clusters: ClusterComparison,
    pub histograms: PixelHistograms,
}

/// All five metrics. Energy-sum histograms span [0, d * e_max].
pub fn evaluate(gen: &[Vec<f64>], reference: &[Vec<f64>], e_max: f64, seed: u64) -> Result<EvalReport> {
    let d = check_pair(gen, reference)?;
    let hist_max = d as f64 * e_max;
    Ok(EvalReport {
        n_gen: gen.len(),
        n_ref: reference.len(),
        shape_gen: pixel_means(gen)?,
        shape_ref: pixel_means(reference)?,
        shape_mse: shower_shape_mse(gen, reference)?,
        correlation: correlation_metric(gen, reference)?,
        esum_gen: energy_sum_stats(gen, hist_max)?,
        esum_ref: energy_sum_stats(reference, hist_max)?,
        clusters: compare_clusters(gen, reference, N_CLUSTERS, seed)?,
        histograms: per_pixel_histograms(gen, reference, e_max, HIST_BINS)?,
    })
}

impl EvalReport {
    /// Plot-ready tables keyed by file name.
    pub fn csv_tables(&self) -> Vec<(&'static str, String)> {
        let mut shape = String::from("pixel,gen_mean,ref_mean\n");
        for (j, (g, r)) in self.shape_gen.iter().zip(&self.shape_ref).enumerate() {
            let _ = writeln!(shape, "{j},{g},{r}");
        }
        let mut corr = String::from("source,row,col,value\n");
        for (src, m) in [("gen", &self.correlation.gen), ("ref", &self.correlation.reference)] {
            for (i, row) in m.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let _ = writeln!(corr, "{src},{i},{j},{v}");
                }
            }
        }
        let mut esum = String::from("source,bin_lo,bin_hi,count\n");
        for (src, h) in [("gen", &self.esum_gen.histogram), ("ref", &self.esum_ref.histogram)] {
            for (b, c) in h.counts.iter().enumerate() {
                let _ = writeln!(esum, "{src},{},{},{c}", h.edges[b], h.edges[b + 1]);
            }
        }
        let mut clusters = String::from("source,cluster,pixel,value\n");
        for (src, cs) in [("gen", &self.clusters.gen), ("ref", &self.clusters.reference)] {
            for (c, centroid) in cs.iter().enumerate() {
                for (j, v) in centroid.iter().enumerate() {
                    let _ = writeln!(clusters, "{src},{c},{j},{v}");
                }
            }
        }
        let mut hist = String::from("source,pixel,bin_lo,bin_hi,count\n");
        for (src, hs) in [("gen", &self.histograms.gen), ("ref", &self.histograms.reference)] {
            for (j, h) in hs.iter().enumerate() {
                for (b, c) in h.counts.iter().enumerate() {
                    let _ = writeln!(hist, "{src},{j},{},{},{c}", h.edges[b], h.edges[b + 1]);
                }
            }
        }
        vec![
            ("shape.csv", shape),
            ("correlation.csv", corr),
            ("energy_sum_hist.csv", esum),
            ("clusters.csv", clusters),
            ("pixel_hist.csv", hist),
        ]
    }
}
