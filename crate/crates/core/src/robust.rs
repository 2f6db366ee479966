//! The multi-level robust DTW distance and pairwise distance matrices.
//!
//! Both inputs are robust-normalized and self-detrended with the Huber trend
//! filter. The trends are halved repeatedly into a pyramid. At the coarsest
//! level an initial path comes from [`fast_dtw`]. Then, from coarse to fine,
//! each level alternates windowed DTW on the current trend estimates with
//! joint graph detrending along the resulting path. Estimates move between
//! levels by linear interpolation and the search window is the projection of
//! the previous level's path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtw::{downsample, dtw_exact, dtw_windowed, fast_dtw, project_path, SearchWindow, WarpPath};
use crate::error::{Error, Result};
use crate::graph::{graph_detrend_from, GraphDetrendConfig};
use crate::series::{normalize_values, TimeSeries};
use crate::trend::{robust_trend, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustDtwConfig {
    pub self_detrend: SolverConfig,
    pub graph_detrend: GraphDetrendConfig,
    pub radius: usize,
    pub min_level_size: usize,
    pub inner_iterations: usize,
    /// Relative cost change below which the inner loop stops early.
    pub inner_tolerance: f64,
}

/// Self-detrending weights used by the pipeline default. Spikes leave the
/// trend whenever `lambda1 + lambda2 > huber_gamma`, endpoints included, while
/// the trend keeps the shape of the series.
pub const PIPELINE_SELF_DETREND: (f64, f64, f64) = (0.2, 0.5, 0.5);

/// Graph-detrending weights used by the pipeline default. Larger weights fuse
/// aligned samples of the two series and drive all distances towards zero.
pub const PIPELINE_GRAPH_DETREND: (f64, f64) = (0.01, 0.05);

impl Default for RobustDtwConfig {
    /// Calibrated on held-out synthetic corpora; the standalone solver
    /// defaults smooth short series too strongly for alignment.
    fn default() -> Self {
        let (l1, l2, gamma) = PIPELINE_SELF_DETREND;
        let (g1, g2) = PIPELINE_GRAPH_DETREND;
        Self {
            self_detrend: SolverConfig {
                huber_gamma: gamma,
                ..SolverConfig::default().with_lambdas(l1, l2)
            },
            graph_detrend: GraphDetrendConfig {
                lambda1_gd: g1,
                lambda2_gd: g2,
                ..GraphDetrendConfig::default()
            },
            radius: 2,
            min_level_size: 16,
            inner_iterations: 3,
            inner_tolerance: 1e-4,
        }
    }
}

impl RobustDtwConfig {
    pub fn validate(&self) -> Result<()> {
        self.self_detrend.validate()?;
        self.graph_detrend.validate()?;
        if self.radius == 0 {
            return Err(Error::Config("radius must be positive".into()));
        }
        if self.min_level_size < 2 {
            return Err(Error::Config("min_level_size must be at least 2".into()));
        }
        if self.inner_iterations == 0 {
            return Err(Error::Config("inner_iterations must be positive".into()));
        }
        if !(self.inner_tolerance >= 0.0 && self.inner_tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "inner_tolerance must be finite and >= 0, got {}",
                self.inner_tolerance
            )));
        }
        Ok(())
    }
}

/// Diagnostics for one pyramid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub x_len: usize,
    pub y_len: usize,
    /// Cumulative squared cost of the last alignment at this level.
    pub cost: f64,
    pub iterations: usize,
    pub window_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustDtwResult {
    /// `sqrt(cost) / path length` over the final trends.
    pub distance: f64,
    pub path: WarpPath,
    pub final_trends: (TimeSeries, TimeSeries),
    pub converged: bool,
    /// Coarsest level first.
    pub level_trace: Vec<LevelTrace>,
    /// Window the final path was searched in.
    pub window: SearchWindow,
    pub notes: Vec<String>,
}

/// Linear interpolation of `series` onto `target_len` points with the end
/// samples mapped onto each other.
pub fn upsample_trend(series: &TimeSeries, target_len: usize) -> Result<TimeSeries> {
    Ok(TimeSeries::from_trusted(upsample_values(series.values(), target_len)?))
}

fn upsample_values(s: &[f64], target_len: usize) -> Result<Vec<f64>> {
    let len = s.len();
    if target_len + 1 < 2 * len || target_len > 2 * len + 1 {
        return Err(Error::invalid(format!(
            "cannot upsample length {len} to {target_len}; expected one of {}..={}",
            (2 * len).saturating_sub(1),
            2 * len + 1
        )));
    }
    if len == 1 || target_len == 1 {
        return Ok(vec![s[0]; target_len]);
    }
    let scale = (len - 1) as f64 / (target_len - 1) as f64;
    Ok((0..target_len)
        .map(|i| {
            if i == target_len - 1 {
                return s[len - 1];
            }
            let p = i as f64 * scale;
            let k = (p.floor() as usize).min(len - 2);
            let f = p - k as f64;
            s[k] + f * (s[k + 1] - s[k])
        })
        .collect())
}

/// A series normalized, self-detrended and halved down to the pyramid floor.
#[derive(Debug, Clone)]
pub struct PreparedSeries {
    /// Finest level first.
    levels: Vec<Vec<f64>>,
    converged: bool,
}

impl PreparedSeries {
    pub fn new(series: &TimeSeries, config: &RobustDtwConfig) -> Result<Self> {
        config.validate()?;
        if series.len() < 3 {
            return Err(Error::invalid(format!(
                "robust DTW needs at least three samples, got {}",
                series.len()
            )));
        }
        let normalized = TimeSeries::from_trusted(normalize_values(series.values())?);
        let dec = robust_trend(&normalized, &config.self_detrend)?;
        let mut levels = vec![dec.trend.into_values()];
        while levels.last().expect("non-empty").len() > config.min_level_size {
            let next = downsample(levels.last().expect("non-empty"))?;
            levels.push(next);
        }
        Ok(Self {
            levels,
            converged: dec.converged,
        })
    }

    pub fn trend(&self) -> &[f64] {
        &self.levels[0]
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Robust DTW between two series.
pub fn robust_dtw(x: &TimeSeries, y: &TimeSeries, config: &RobustDtwConfig) -> Result<RobustDtwResult> {
    let px = PreparedSeries::new(x, config)?;
    let py = PreparedSeries::new(y, config)?;
    robust_dtw_prepared(&px, &py, config)
}

fn bitwise_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(p, q)| p.to_bits() == q.to_bits())
}

/// Robust DTW between two series that were prepared with the same config.
pub fn robust_dtw_prepared(
    px: &PreparedSeries,
    py: &PreparedSeries,
    config: &RobustDtwConfig,
) -> Result<RobustDtwResult> {
    config.validate()?;
    let (m, n) = (px.len(), py.len());
    let mut notes = Vec::new();
    let mut converged = px.converged && py.converged;

    if bitwise_equal(px.trend(), py.trend()) {
        let t = TimeSeries::from_trusted(px.trend().to_vec());
        return Ok(RobustDtwResult {
            distance: 0.0,
            path: WarpPath::diagonal(m),
            final_trends: (t.clone(), t),
            converged,
            level_trace: vec![LevelTrace {
                x_len: m,
                y_len: n,
                cost: 0.0,
                iterations: 0,
                window_cells: m,
            }],
            window: SearchWindow::new((0..m).map(|i| (i, i)).collect(), m)?,
            notes: vec!["identical trends; alignment skipped".into()],
        });
    }

    // Halve both series together until the shorter one reaches the floor.
    let mut depth = 0;
    let mut short = m.min(n);
    while short > config.min_level_size && depth + 1 < px.levels.len() && depth + 1 < py.levels.len() {
        depth += 1;
        short = short.div_ceil(2);
    }
    if m.min(n) < config.min_level_size {
        notes.push(format!(
            "series shorter than min_level_size ({}); single-level alignment",
            config.min_level_size
        ));
    }

    let mut trace = Vec::with_capacity(depth + 1);
    let mut path: Option<WarpPath> = None;
    let mut a: Vec<f64> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut window = SearchWindow::full(1, 1);
    let mut last_cost = f64::NAN;

    for level in (0..=depth).rev() {
        let target_x = &px.levels[level];
        let target_y = &py.levels[level];
        let (lm, ln) = (target_x.len(), target_y.len());
        let mut initial = None;
        match &path {
            None => {
                a = target_x.clone();
                b = target_y.clone();
                window = SearchWindow::full(lm, ln);
                initial = Some(fast_dtw(&a, &b, config.radius)?);
            }
            Some(coarse) => {
                a = upsample_values(&a, lm)?;
                b = upsample_values(&b, ln)?;
                window = project_path(coarse, config.radius, lm, ln);
            }
        }

        let mut prev_cost = f64::INFINITY;
        let mut iterations = 0;
        for _ in 0..config.inner_iterations {
            let aligned = match initial.take() {
                Some(init) => init,
                None => dtw_windowed(&a, &b, &window)?,
            };
            iterations += 1;
            // the current trends are a close starting point for the solver
            let gd = graph_detrend_from(
                &TimeSeries::from_trusted(target_x.clone()),
                &TimeSeries::from_trusted(target_y.clone()),
                &aligned.path,
                &config.graph_detrend,
                Some((&a, &b)),
            )?;
            converged &= gd.converged;
            a = gd.x_trend.into_values();
            b = gd.y_trend.into_values();
            let cost = aligned.cumulative_cost;
            let change = (prev_cost - cost).abs() / cost.max(f64::MIN_POSITIVE);
            prev_cost = cost;
            if change < config.inner_tolerance {
                break;
            }
        }
        // align the refreshed trends once more for this level's final path
        let settled = dtw_windowed(&a, &b, &window)?;
        last_cost = settled.cumulative_cost;
        trace.push(LevelTrace {
            x_len: lm,
            y_len: ln,
            cost: last_cost,
            iterations,
            window_cells: window.cell_count(),
        });
        path = Some(settled.path);
    }

    let path = path.expect("at least one level");
    let distance = last_cost.sqrt() / path.len() as f64;
    Ok(RobustDtwResult {
        distance,
        path,
        final_trends: (TimeSeries::from_trusted(a), TimeSeries::from_trusted(b)),
        converged,
        level_trace: trace,
        window,
        notes,
    })
}

/// Dissimilarity measures available for pairwise matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure {
    Robust(RobustDtwConfig),
    /// Exact DTW on robust-normalized series.
    Dtw,
    /// FastDTW on robust-normalized series.
    FastDtw {
        radius: usize,
    },
    /// Lock-step distance on robust-normalized series of equal length.
    Euclidean,
}

impl Measure {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Robust(_) => "robust",
            Measure::Dtw => "dtw",
            Measure::FastDtw { .. } => "fastdtw",
            Measure::Euclidean => "euclidean",
        }
    }
}

enum Prepared {
    Robust(PreparedSeries),
    Plain(Vec<f64>),
}

fn prepare(series: &TimeSeries, measure: &Measure) -> Result<Prepared> {
    match measure {
        Measure::Robust(cfg) => PreparedSeries::new(series, cfg).map(Prepared::Robust),
        _ => {
            if series.len() < 2 {
                return Err(Error::invalid("series need at least two samples"));
            }
            normalize_values(series.values()).map(Prepared::Plain)
        }
    }
}

fn pair_distance(a: &Prepared, b: &Prepared, measure: &Measure) -> Result<f64> {
    match (measure, a, b) {
        (Measure::Robust(cfg), Prepared::Robust(p), Prepared::Robust(q)) => {
            robust_dtw_prepared(p, q, cfg).map(|r| r.distance)
        }
        (Measure::Dtw, Prepared::Plain(x), Prepared::Plain(y)) => {
            let r = dtw_exact(x, y)?;
            Ok(r.distance / r.path.len() as f64)
        }
        (Measure::FastDtw { radius }, Prepared::Plain(x), Prepared::Plain(y)) => {
            let r = fast_dtw(x, y, *radius)?;
            Ok(r.distance / r.path.len() as f64)
        }
        (Measure::Euclidean, Prepared::Plain(x), Prepared::Plain(y)) => {
            if x.len() != y.len() {
                return Err(Error::invalid(format!(
                    "euclidean distance needs equal lengths, got {} and {}",
                    x.len(),
                    y.len()
                )));
            }
            let ss: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            Ok(ss.sqrt() / x.len() as f64)
        }
        _ => unreachable!("series prepared for a different measure"),
    }
}

/// Distance between two series under `measure`, including preparation.
pub fn measure_distance(x: &TimeSeries, y: &TimeSeries, measure: &Measure) -> Result<f64> {
    let a = prepare(x, measure)?;
    let b = prepare(y, measure)?;
    pair_distance(&a, &b, measure)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

/// Symmetric matrix of pairwise distances; each unordered pair is computed
/// once. Errors carry the pair indices.
pub fn distance_matrix_with(series: &[TimeSeries], measure: &Measure, exec: Execution) -> Result<Vec<Vec<f64>>> {
    let k = series.len();
    if k < 2 {
        return Err(Error::invalid(format!("need at least two series, got {k}")));
    }
    let tag = |i: usize| {
        move |e: Error| Error::Pair {
            i,
            j: i,
            source: Box::new(e),
        }
    };
    let prepared: Vec<Prepared> = match exec {
        Execution::Sequential => series
            .iter()
            .enumerate()
            .map(|(i, s)| prepare(s, measure).map_err(tag(i)))
            .collect::<Result<_>>()?,
        Execution::Parallel => series
            .par_iter()
            .enumerate()
            .map(|(i, s)| prepare(s, measure).map_err(tag(i)))
            .collect::<Result<_>>()?,
    };
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let eval = |&(i, j): &(usize, usize)| {
        pair_distance(&prepared[i], &prepared[j], measure).map_err(|e| Error::Pair {
            i,
            j,
            source: Box::new(e),
        })
    };
    let values: Vec<f64> = match exec {
        Execution::Sequential => pairs.iter().map(eval).collect::<Result<_>>()?,
        Execution::Parallel => pairs.par_iter().map(eval).collect::<Result<_>>()?,
    };
    let mut out = vec![vec![0.0; k]; k];
    for (&(i, j), d) in pairs.iter().zip(values) {
        out[i][j] = d;
        out[j][i] = d;
    }
    Ok(out)
}

/// Pairwise robust DTW distances, evaluated in parallel.
pub fn distance_matrix(series: &[TimeSeries], config: &RobustDtwConfig) -> Result<Vec<Vec<f64>>> {
    distance_matrix_with(series, &Measure::Robust(*config), Execution::Parallel)
}
