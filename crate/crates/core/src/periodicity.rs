//! Periodicity check for a known period by slicing.
//!
//! The series is scaled, its global trend removed, the residual normalized
//! and cut into period-long segments. Adjacent segments are
//! compared with a distance measure, distances outside Tukey fences are
//! dropped and the mean of the rest is compared with a threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robust::{measure_distance, Measure, RobustDtwConfig};
use crate::series::{biweight_scale, median, normalize_values, TimeSeries, BIWEIGHT_C};
use crate::trend::{robust_trend, SolverConfig};

// Decision thresholds, one per measure: the best-F1 cut on a synthetic
// calibration corpus (`make_periodicity_corpus(50, 50, 32, 8, 2024)`).
// They are empirical defaults, not derived constants.
pub const ROBUST_THRESHOLD: f64 = 0.01105;
pub const DTW_THRESHOLD: f64 = 0.2084;
pub const FASTDTW_THRESHOLD: f64 = 0.2088;
pub const EUCLIDEAN_THRESHOLD: f64 = 0.2193;

/// Calibrated default threshold for a measure.
pub fn default_threshold(measure: &Measure) -> f64 {
    match measure {
        Measure::Robust(_) => ROBUST_THRESHOLD,
        Measure::Dtw => DTW_THRESHOLD,
        Measure::FastDtw { .. } => FASTDTW_THRESHOLD,
        Measure::Euclidean => EUCLIDEAN_THRESHOLD,
    }
}

/// Trend filter used to remove the global trend. With no first-order term
/// and a strong second-order penalty the estimate stays close to a robust
/// straight line and does not absorb the periodic component.
pub fn default_detrend() -> SolverConfig {
    SolverConfig {
        lambda1: 0.0,
        lambda2: 100.0,
        max_iter: 5000,
        ..SolverConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodicityConfig {
    pub period: usize,
    pub threshold: f64,
    pub iqr_factor: f64,
    pub dtw_config: RobustDtwConfig,
    pub detrend: SolverConfig,
}

impl Default for PeriodicityConfig {
    fn default() -> Self {
        Self {
            period: 32,
            threshold: ROBUST_THRESHOLD,
            iqr_factor: 1.5,
            dtw_config: RobustDtwConfig::default(),
            detrend: default_detrend(),
        }
    }
}

impl PeriodicityConfig {
    pub fn new(period: usize) -> Self {
        Self {
            period,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period < 4 {
            return Err(Error::Config(format!("period must be at least 4, got {}", self.period)));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!(
                "threshold must be finite and > 0, got {}",
                self.threshold
            )));
        }
        if !(self.iqr_factor > 0.0 && self.iqr_factor.is_finite()) {
            return Err(Error::Config(format!(
                "iqr_factor must be finite and > 0, got {}",
                self.iqr_factor
            )));
        }
        self.dtw_config.validate()?;
        self.detrend.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityResult {
    pub is_periodic: bool,
    pub score: f64,
    pub segment_distances: Vec<f64>,
    pub retained_mask: Vec<bool>,
    pub notes: Vec<String>,
}

/// Consecutive non-overlapping segments of `period` samples; the trailing
/// remainder is dropped.
pub fn slice_segments(series: &TimeSeries, period: usize) -> Result<Vec<TimeSeries>> {
    if period == 0 {
        return Err(Error::invalid("period must be positive"));
    }
    let count = series.len() / period;
    if count < 3 {
        return Err(Error::invalid(format!(
            "length {} holds {count} segments of period {period}, need at least 3",
            series.len()
        )));
    }
    series.values()[..count * period]
        .chunks_exact(period)
        .map(|c| TimeSeries::new(c.to_vec()))
        .collect()
}

/// Quantile by linear interpolation between order statistics of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Tukey fence mask: keeps `v` within `[Q1 - f*IQR, Q3 + f*IQR]`.
pub fn iqr_filter(values: &[f64], factor: f64) -> Result<Vec<bool>> {
    if values.len() < 3 {
        return Err(Error::invalid(format!(
            "IQR filter needs at least 3 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("IQR filter input must be finite"));
    }
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::invalid(format!(
            "IQR factor must be finite and > 0, got {factor}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - factor * iqr, q3 + factor * iqr);
    let mask: Vec<bool> = values.iter().map(|&v| v >= lo && v <= hi).collect();
    if mask.iter().any(|&m| m) {
        return Ok(mask);
    }
    // unreachable for exact arithmetic since Q1 <= median <= Q3
    let median = sorted[(sorted.len() - 1) / 2];
    Ok(values.iter().map(|&v| v == median).collect())
}

/// Centers by the median and divides by the biweight scale of the first
/// differences. Adding a line shifts every difference by the same constant,
/// so the scale, and with it the Huber threshold of the detrender, does not
/// depend on the global trend. Falls back to the scale of the values when the
/// differences are constant.
fn difference_scaled(values: &[f64]) -> Result<Vec<f64>> {
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut scale = biweight_scale(&diffs, BIWEIGHT_C)?;
    if scale == 0.0 {
        scale = biweight_scale(values, BIWEIGHT_C)?;
    }
    if scale == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    let m = median(values)?;
    Ok(values.iter().map(|x| (x - m) / scale).collect())
}

/// Slicing check under the robust DTW measure of `config.dtw_config`.
pub fn detect_periodicity(series: &TimeSeries, config: &PeriodicityConfig) -> Result<PeriodicityResult> {
    detect_periodicity_with(series, config, &Measure::Robust(config.dtw_config))
}

/// Slicing check with an arbitrary segment distance.
pub fn detect_periodicity_with(
    series: &TimeSeries,
    config: &PeriodicityConfig,
    measure: &Measure,
) -> Result<PeriodicityResult> {
    config.validate()?;
    let period = config.period;
    if series.len() < 3 * period {
        return Err(Error::invalid(format!(
            "length {} is shorter than three periods of {period}",
            series.len()
        )));
    }
    let mut notes = Vec::new();

    let scaled = TimeSeries::new(difference_scaled(series.values())?)?;
    let decomposition = robust_trend(&scaled, &config.detrend)?;
    if !decomposition.converged {
        notes.push(format!(
            "global detrend stopped after {} iterations without meeting tolerance",
            decomposition.iterations
        ));
    }
    let residual = TimeSeries::new(normalize_values(decomposition.residual.values())?)?;
    let segments = slice_segments(&residual, period)?;
    if let Measure::Robust(cfg) = measure {
        if period <= cfg.min_level_size {
            notes.push(format!(
                "segments of {period} samples use a single alignment level (min_level_size {})",
                cfg.min_level_size
            ));
        }
    }

    let segment_distances: Vec<f64> = segments
        .par_windows(2)
        .map(|w| measure_distance(&w[0], &w[1], measure))
        .collect::<Result<_>>()?;
    let retained_mask = iqr_filter(&segment_distances, config.iqr_factor)?;
    let kept: Vec<f64> = segment_distances
        .iter()
        .zip(&retained_mask)
        .filter(|(_, &m)| m)
        .map(|(&d, _)| d)
        .collect();
    let score = kept.iter().sum::<f64>() / kept.len() as f64;
    Ok(PeriodicityResult {
        is_periodic: score < config.threshold,
        score,
        segment_distances,
        retained_mask,
        notes,
    })
}
