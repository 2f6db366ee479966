//! Local outlier factor over a precomputed distance matrix, noise injection
//! and AUC evaluation.
//!
//! Distances between series need not be metric, so LOF is computed directly
//! from the matrix instead of through a spatial index. Neighbourhoods include
//! ties at the k-distance. A point whose neighbourhood is at distance zero has
//! infinite local reachability density. Ratios then follow `∞/∞ = 1`,
//! `finite/∞ = 0` and `∞/finite = ∞`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robust::{distance_matrix_with, Execution, Measure};
use crate::series::{biweight_scale, mad, TimeSeries, BIWEIGHT_C, MAD_CONSISTENCY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LofConfig {
    pub k_neighbors: usize,
    pub contamination: f64,
}

impl Default for LofConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 30,
            contamination: 0.02,
        }
    }
}

impl LofConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be positive".into()));
        }
        if !(self.contamination > 0.0 && self.contamination < 1.0) {
            return Err(Error::Config(format!(
                "contamination must lie in (0, 1), got {}",
                self.contamination
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LofResult {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    /// Lowest score among the labelled series.
    pub threshold: f64,
}

fn check_matrix(dist: &[Vec<f64>]) -> Result<()> {
    let n = dist.len();
    for (i, row) in dist.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if row[i] != 0.0 {
            return Err(Error::invalid(format!("diagonal entry {i} is {}", row[i])));
        }
        for (j, &d) in row.iter().enumerate() {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::invalid(format!("entry ({i}, {j}) is {d}")));
            }
            if d != dist[j][i] {
                return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn density_ratio(num: f64, den: f64) -> f64 {
    match (num.is_infinite(), den.is_infinite()) {
        (true, true) => 1.0,
        (false, true) => 0.0,
        (true, false) => f64::INFINITY,
        (false, false) => num / den,
    }
}

/// LOF score of every point of a symmetric, zero-diagonal distance matrix.
pub fn lof_scores(dist: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    let n = dist.len();
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if n <= k {
        return Err(Error::invalid(format!(
            "LOF with k = {k} needs more than {k} points, got {n}"
        )));
    }
    check_matrix(dist)?;

    let mut k_distance = vec![0.0; n];
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(n);
    for p in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n).filter(|&o| o != p).map(|o| (dist[p][o], o)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let kd = others[k - 1].0;
        k_distance[p] = kd;
        neighbors.push(others.iter().take_while(|&&(d, _)| d <= kd).map(|&(_, o)| o).collect());
    }

    let lrd: Vec<f64> = (0..n)
        .map(|p| {
            let sum: f64 = neighbors[p].iter().map(|&o| k_distance[o].max(dist[p][o])).sum();
            if sum == 0.0 {
                f64::INFINITY
            } else {
                neighbors[p].len() as f64 / sum
            }
        })
        .collect();

    Ok((0..n)
        .map(|p| {
            let total: f64 = neighbors[p].iter().map(|&o| density_ratio(lrd[o], lrd[p])).sum();
            total / neighbors[p].len() as f64
        })
        .collect())
}

/// Marks the `ceil(contamination * N)` highest scores; ties go to the lower
/// index.
pub fn label_top(scores: &[f64], contamination: f64) -> Result<LofResult> {
    if scores.is_empty() {
        return Err(Error::invalid("no scores to label"));
    }
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::Config(format!(
            "contamination must lie in (0, 1), got {contamination}"
        )));
    }
    let n = scores.len();
    let count = ((contamination * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut labels = vec![false; n];
    for &i in &order[..count] {
        labels[i] = true;
    }
    Ok(LofResult {
        scores: scores.to_vec(),
        labels,
        threshold: scores[order[count - 1]],
    })
}

/// Distance matrix under `measure`, then LOF and top-contamination labelling.
pub fn detect_outliers_with(series: &[TimeSeries], measure: &Measure, lof: &LofConfig) -> Result<LofResult> {
    lof.validate()?;
    if series.len() <= lof.k_neighbors {
        return Err(Error::invalid(format!(
            "{} series is too few for k_neighbors = {}",
            series.len(),
            lof.k_neighbors
        )));
    }
    let dist = distance_matrix_with(series, measure, Execution::Parallel)?;
    let scores = lof_scores(&dist, lof.k_neighbors)?;
    label_top(&scores, lof.contamination)
}

/// Robust DTW distances, then LOF.
pub fn detect_outliers(
    series: &[TimeSeries],
    dtw_config: &crate::robust::RobustDtwConfig,
    lof: &LofConfig,
) -> Result<LofResult> {
    detect_outliers_with(series, &Measure::Robust(*dtw_config), lof)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Spikes,
    Dips,
    /// Alternates spike, dip, spike, ...
    Both,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spikes" => Ok(NoiseKind::Spikes),
            "dips" => Ok(NoiseKind::Dips),
            "both" => Ok(NoiseKind::Both),
            other => Err(Error::invalid(format!(
                "unknown noise kind '{other}' (spikes, dips, both)"
            ))),
        }
    }
}

/// Adds `count` spikes and/or dips of `magnitude` robust scale units at
/// distinct positions drawn from `seed`.
///
/// The unit is the biweight scale of the input, falling back to the scaled
/// MAD and then to 1 for constant input.
pub fn inject_noise(
    series: &TimeSeries,
    kind: NoiseKind,
    count: usize,
    magnitude: f64,
    seed: u64,
) -> Result<TimeSeries> {
    let n = series.len();
    if count == 0 {
        return Ok(series.clone());
    }
    if 4 * count >= n {
        return Err(Error::invalid(format!(
            "{count} injections need a series longer than {}, got {n}",
            4 * count
        )));
    }
    if !magnitude.is_finite() {
        return Err(Error::invalid("magnitude must be finite"));
    }
    let v = series.values();
    let mut unit = biweight_scale(v, BIWEIGHT_C)?;
    if unit == 0.0 {
        unit = MAD_CONSISTENCY * mad(v)?;
    }
    if unit == 0.0 {
        unit = 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = v.to_vec();
    for (k, pos) in sample(&mut rng, n, count).into_iter().enumerate() {
        let sign = match kind {
            NoiseKind::Spikes => 1.0,
            NoiseKind::Dips => -1.0,
            NoiseKind::Both if k % 2 == 0 => 1.0,
            NoiseKind::Both => -1.0,
        };
        out[pos] += sign * magnitude * unit;
    }
    let mut s = TimeSeries::new(out)?;
    if let Some(name) = series.name() {
        s = s.with_name(name);
    }
    Ok(s)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc_score(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            truth.len()
        )));
    }
    let pos: Vec<f64> = scores.iter().zip(truth).filter(|(_, &t)| t).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(truth).filter(|(_, &t)| !t).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("AUC needs at least one positive and one negative label"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}
