//! Time series values and the robust location/scale statistics used to
//! normalize them.
//!
//! Normalization throughout the crate is median-centering followed by division
//! by the biweight scale, so gross outliers have bounded influence on both the
//! location and the scale estimate.

use crate::error::{Error, Result};

/// Default tuning constant for the biweight scale.
pub const BIWEIGHT_C: f64 = 9.0;

/// Normal-consistency factor applied to the MAD when the biweight scale is
/// undefined.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// An ordered, non-empty sequence of finite samples with an optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    name: Option<String>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("time series must contain at least one value"));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value {} at index {idx}",
                values[idx]
            )));
        }
        Ok(Self { values, name: None })
    }

    pub fn named(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let mut s = Self::new(values)?;
        s.name = Some(name.into());
        Ok(s)
    }

    /// Builds a series from values already known to be finite and non-empty.
    pub(crate) fn from_trusted(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values, name: None }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Summary of the robust location and scale of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustStats {
    pub median: f64,
    pub mad: f64,
    pub biweight_scale: f64,
    pub tuning_constant: f64,
}

impl RobustStats {
    pub fn compute(values: &[f64], c: f64) -> Result<Self> {
        let median = median(values)?;
        let mad = mad_about(values, median);
        let biweight_scale = biweight_scale(values, c)?;
        Ok(Self {
            median,
            mad,
            biweight_scale,
            tuning_constant: c,
        })
    }
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        // symmetric in (a, b) and under negation, and never leaves [a, b]
        0.5 * sorted[n / 2 - 1] + 0.5 * sorted[n / 2]
    }
}

/// Sample median; the mean of the two central order statistics for even
/// lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty sequence"));
    }
    Ok(median_of_sorted(&sorted_copy(values)))
}

/// Raw median absolute deviation about `center` (no consistency factor).
fn mad_about(values: &[f64], center: f64) -> f64 {
    let dev: Vec<f64> = values.iter().map(|x| (x - center).abs()).collect();
    median_of_sorted(&sorted_copy(&dev))
}

/// Raw median absolute deviation about the median.
pub fn mad(values: &[f64]) -> Result<f64> {
    let m = median(values)?;
    Ok(mad_about(values, m))
}

/// Biweight scale with tuning constant `c`.
///
/// With `u_i = (x_i - M) / (c * MAD)` and sums taken over `|u_i| < 1`:
///
/// ```text
/// sqrt(n * sum (x_i - M)^2 (1 - u_i^2)^4) / |sum (1 - u_i^2)(1 - 5 u_i^2)|
/// ```
///
/// Falls back to `1.4826 * MAD` when the MAD is zero or the denominator sum
/// is not positive, so a constant series has scale zero.
pub fn biweight_scale(values: &[f64], c: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("biweight scale needs at least two values"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("tuning constant must be positive, got {c}")));
    }
    let m = median(values)?;
    let mad = mad_about(values, m);
    if mad == 0.0 {
        return Ok(MAD_CONSISTENCY * mad);
    }
    let n = values.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for &x in values {
        let d = x - m;
        let u = d / (c * mad);
        if u.abs() < 1.0 {
            let w = 1.0 - u * u;
            num += d * d * w.powi(4);
            den += w * (1.0 - 5.0 * u * u);
        }
    }
    if den <= 0.0 {
        return Ok(MAD_CONSISTENCY * mad);
    }
    Ok((n * num).sqrt() / den)
}

/// Subtracts the median and divides by the biweight scale (`c = 9`).
/// Constant input maps to the zero series.
pub fn robust_normalize(series: &TimeSeries) -> Result<TimeSeries> {
    let values = normalize_values(series.values())?;
    let mut out = TimeSeries::from_trusted(values);
    out.name = series.name.clone();
    Ok(out)
}

pub(crate) fn normalize_values(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::invalid("robust normalization needs at least two values"));
    }
    let m = median(values)?;
    let scale = biweight_scale(values, BIWEIGHT_C)?;
    if scale == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    let mut out: Vec<f64> = values.iter().map(|x| (x - m) / scale).collect();
    let n = values.len();
    if n % 2 == 0 {
        // Snap the central pair to ±h so the output median is exactly zero.
        let sorted = sorted_copy(values);
        let (a, b) = (sorted[n / 2 - 1], sorted[n / 2]);
        let h = ((b - m) / scale - (a - m) / scale) / 2.0;
        for (o, &x) in out.iter_mut().zip(values) {
            if x == a {
                *o = -h;
            } else if x == b {
                *o = h;
            }
        }
    }
    Ok(out)
}
