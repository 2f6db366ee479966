//! Seeded synthetic series, evaluation corpora and the runtime scaling bench.
//!
//! Every generator draws from ChaCha8 seeded through `seed_from_u64`, with
//! Gaussian samples from `rand_distr::Normal`, so a spec always yields the
//! same bits on every platform.

use std::f64::consts::PI;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lof::{inject_noise, NoiseKind};
use crate::robust::{measure_distance, Measure};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalKind {
    #[serde(rename = "sine")]
    Sine,
    #[serde(rename = "square")]
    Square,
    #[serde(rename = "noise")]
    Noise,
    #[serde(rename = "trend+sine")]
    TrendSine,
}

/// Description of one synthetic series.
///
/// `cycles` and `phase` shape the periodic kinds; a default spec is one full
/// period starting at phase zero. `trend_slope` only applies to `TrendSine`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: SignalKind,
    pub length: usize,
    pub noise_sigma: f64,
    pub trend_slope: f64,
    pub seed: u64,
    #[serde(default = "one")]
    pub cycles: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

impl GeneratorSpec {
    pub fn new(kind: SignalKind, length: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            kind,
            length,
            noise_sigma,
            trend_slope: 0.0,
            seed,
            cycles: 1.0,
            phase: 0.0,
        }
    }

    pub fn sine(length: usize, noise_sigma: f64, seed: u64) -> Self {
        Self::new(SignalKind::Sine, length, noise_sigma, seed)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("sigma validated").sample(rng)
}

/// Synthesizes the series described by `spec`.
pub fn generate(spec: &GeneratorSpec) -> Result<TimeSeries> {
    if spec.length < 4 {
        return Err(Error::invalid(format!(
            "generated length must be at least 4, got {}",
            spec.length
        )));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise_sigma must be finite and >= 0, got {}",
            spec.noise_sigma
        )));
    }
    if !(spec.trend_slope.is_finite() && spec.cycles.is_finite() && spec.phase.is_finite()) {
        return Err(Error::invalid("trend_slope, cycles and phase must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.length as f64;
    let values = (0..spec.length)
        .map(|k| {
            let angle = 2.0 * PI * spec.cycles * k as f64 / n + spec.phase;
            let base = match spec.kind {
                SignalKind::Sine => angle.sin(),
                SignalKind::Square => {
                    if angle.sin() >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                SignalKind::Noise => 0.0,
                SignalKind::TrendSine => angle.sin() + spec.trend_slope * k as f64,
            };
            base + gaussian(&mut rng, spec.noise_sigma)
        })
        .collect();
    TimeSeries::new(values)
}

/// Linear chirp whose frequency sweeps from `f0` to `f1` cycles per series.
fn chirp(length: usize, f0: f64, f1: f64, phase: f64) -> Vec<f64> {
    let n = length as f64;
    (0..length)
        .map(|k| {
            let t = k as f64 / n;
            (2.0 * PI * (f0 * t + 0.5 * (f1 - f0) * t * t) + phase).sin()
        })
        .collect()
}

fn add_noise(values: &mut [f64], rng: &mut ChaCha8Rng, sigma: f64) {
    for v in values {
        *v += gaussian(rng, sigma);
    }
}

/// Labelled corpus of phase-jittered sines with square or chirp outliers.
///
/// Normals come first, then outliers alternating square and chirp.
pub fn make_outlier_corpus(
    n_normal: usize,
    n_outlier: usize,
    length: usize,
    seed: u64,
) -> Result<(Vec<TimeSeries>, Vec<bool>)> {
    if n_normal < 30 {
        return Err(Error::invalid(format!(
            "outlier corpus needs at least 30 normals, got {n_normal}"
        )));
    }
    if length < 8 {
        return Err(Error::invalid(format!(
            "outlier corpus length must be at least 8, got {length}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::with_capacity(n_normal + n_outlier);
    for i in 0..n_normal {
        let spec = GeneratorSpec {
            cycles: 2.0,
            phase: rng.random_range(-0.3..0.3),
            ..GeneratorSpec::sine(length, 0.1, rng.random())
        };
        series.push(generate(&spec)?.with_name(format!("normal_{i}")));
    }
    for i in 0..n_outlier {
        let phase = rng.random_range(-0.3..0.3);
        let values = if i % 2 == 0 {
            let spec = GeneratorSpec {
                cycles: 2.0,
                phase,
                ..GeneratorSpec::new(SignalKind::Square, length, 0.1, rng.random())
            };
            generate(&spec)?.into_values()
        } else {
            let mut v = chirp(length, 0.5, 6.0, phase);
            add_noise(&mut v, &mut rng, 0.1);
            v
        };
        series.push(TimeSeries::new(values)?.with_name(format!("outlier_{i}")));
    }
    let mut truth = vec![false; n_normal];
    truth.extend(std::iter::repeat_n(true, n_outlier));
    Ok((series, truth))
}

/// Injection settings for one noise condition of the outlier evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCondition {
    Raw,
    Dips,
    Spikes,
    SpikesAndDips,
}

impl NoiseCondition {
    pub const ALL: [NoiseCondition; 4] = [
        NoiseCondition::Raw,
        NoiseCondition::Dips,
        NoiseCondition::Spikes,
        NoiseCondition::SpikesAndDips,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            NoiseCondition::Raw => "raw data",
            NoiseCondition::Dips => "+ dips",
            NoiseCondition::Spikes => "+ spikes",
            NoiseCondition::SpikesAndDips => "+ spikes & dips",
        }
    }

    fn kind(&self) -> Option<NoiseKind> {
        match self {
            NoiseCondition::Raw => None,
            NoiseCondition::Dips => Some(NoiseKind::Dips),
            NoiseCondition::Spikes => Some(NoiseKind::Spikes),
            NoiseCondition::SpikesAndDips => Some(NoiseKind::Both),
        }
    }
}

/// Share of normal series that receive injections in the noisy conditions.
pub const INJECTED_FRACTION: f64 = 0.2;

/// Applies `count` injections of `magnitude` to a seeded `fraction` of the
/// normal series (`truth == false`); outliers are left untouched.
///
/// Injecting only some normals is what makes the condition hard: a measure
/// that reacts to spikes then ranks the injected normals as outliers.
pub fn apply_condition(
    series: &[TimeSeries],
    truth: &[bool],
    condition: NoiseCondition,
    fraction: f64,
    count: usize,
    magnitude: f64,
    seed: u64,
) -> Result<Vec<TimeSeries>> {
    if series.len() != truth.len() {
        return Err(Error::invalid("series and truth labels differ in length"));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    let Some(kind) = condition.kind() else {
        return Ok(series.to_vec());
    };
    let normals: Vec<usize> = (0..series.len()).filter(|&i| !truth[i]).collect();
    let chosen = (fraction * normals.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hit = vec![false; series.len()];
    for k in sample(&mut rng, normals.len(), chosen) {
        hit[normals[k]] = true;
    }
    series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if hit[i] {
                inject_noise(s, kind, count, magnitude, rng.random())
            } else {
                Ok(s.clone())
            }
        })
        .collect()
}

/// Labelled corpus for periodicity detection, periodic series first.
///
/// Periodic series repeat a random sine, square or two-harmonic shape with
/// the given period under noise, a linear trend and a few spikes.
/// Aperiodic series are white noise, random walks, chirps or concatenations
/// of unrelated random shapes.
pub fn make_periodicity_corpus(
    n_periodic: usize,
    n_aperiodic: usize,
    period: usize,
    n_periods: usize,
    seed: u64,
) -> Result<(Vec<TimeSeries>, Vec<bool>)> {
    if period < 4 || n_periods < 3 {
        return Err(Error::invalid(
            "periodicity corpus needs period >= 4 and at least 3 periods",
        ));
    }
    let length = period * n_periods;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::with_capacity(n_periodic + n_aperiodic);
    for i in 0..n_periodic {
        let phase = rng.random_range(0.0..2.0 * PI);
        let shape = rng.random_range(0..3);
        let ratio: f64 = rng.random_range(0.3..0.8);
        let mut v: Vec<f64> = (0..length)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / period as f64 + phase;
                match shape {
                    0 => a.sin(),
                    1 => {
                        if a.sin() >= 0.0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    _ => a.sin() + ratio * (2.0 * a).cos(),
                }
            })
            .collect();
        let slope = rng.random_range(-3.0..3.0) / length as f64;
        for (k, x) in v.iter_mut().enumerate() {
            *x += slope * k as f64;
        }
        let sigma = rng.random_range(0.05..0.2);
        add_noise(&mut v, &mut rng, sigma);
        let mut s = TimeSeries::new(v)?;
        let spikes = rng.random_range(0..=3);
        if spikes > 0 {
            s = inject_noise(&s, NoiseKind::Both, spikes, 10.0, rng.random())?;
        }
        series.push(s.with_name(format!("periodic_{i}")));
    }
    for i in 0..n_aperiodic {
        let v: Vec<f64> = match i % 4 {
            0 => (0..length).map(|_| gaussian(&mut rng, 1.0)).collect(),
            1 => {
                let mut acc = 0.0;
                (0..length)
                    .map(|_| {
                        acc += gaussian(&mut rng, 1.0);
                        acc
                    })
                    .collect()
            }
            2 => {
                let f0 = rng.random_range(0.5..2.0);
                let f1 = n_periods as f64 * rng.random_range(1.5..3.0);
                let mut v = chirp(length, f0, f1, rng.random_range(0.0..2.0 * PI));
                add_noise(&mut v, &mut rng, 0.1);
                v
            }
            _ => {
                // each period-long block is an unrelated smooth random shape
                let mut v = Vec::with_capacity(length);
                for _ in 0..n_periods {
                    let cycles = rng.random_range(0.5..4.0);
                    let phase = rng.random_range(0.0..2.0 * PI);
                    let amp = rng.random_range(0.3..2.0);
                    v.extend((0..period).map(|k| amp * (2.0 * PI * cycles * k as f64 / period as f64 + phase).sin()));
                }
                add_noise(&mut v, &mut rng, 0.1);
                v
            }
        };
        series.push(TimeSeries::new(v)?.with_name(format!("aperiodic_{i}")));
    }
    let mut truth = vec![true; n_periodic];
    truth.extend(std::iter::repeat_n(false, n_aperiodic));
    Ok((series, truth))
}

/// One (measure, length) cell of the scaling bench. Failed cells keep empty
/// timing and distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub measure: String,
    pub length: usize,
    pub median_ms: Option<f64>,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Error messages of failed cells, in row order.
    pub failures: Vec<String>,
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| Error::invalid(format!("CSV encoding failed: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::invalid(format!("CSV encoding failed: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<BenchRow>, _>>()
            .map_err(|e| Error::invalid(format!("bench CSV: {e}")))?;
        Ok(Self {
            rows,
            failures: Vec::new(),
        })
    }

    pub fn cell(&self, measure: &str, length: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.measure == measure && r.length == length)
    }
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * v[n / 2 - 1] + 0.5 * v[n / 2]
    }
}

/// Noise level of the bench inputs, relative to unit sine amplitude.
pub const BENCH_NOISE_SIGMA: f64 = 0.1;

/// Times each measure on fresh seeded noisy sine pairs at every length and
/// records the median wall time over `repeats` calls.
pub fn run_scaling_bench(lengths: &[usize], measures: &[Measure], repeats: usize) -> Result<BenchReport> {
    if repeats < 5 {
        return Err(Error::invalid(format!("bench needs at least 5 repeats, got {repeats}")));
    }
    if lengths.is_empty() || measures.is_empty() {
        return Err(Error::invalid("bench needs at least one length and one measure"));
    }
    if lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("bench lengths must be strictly ascending"));
    }
    let mut report = BenchReport::default();
    for measure in measures {
        for &length in lengths {
            match bench_cell(measure, length, repeats) {
                Ok((ms, d)) => report.rows.push(BenchRow {
                    measure: measure.name().to_string(),
                    length,
                    median_ms: Some(ms),
                    distance: Some(d),
                }),
                Err(e) => {
                    report
                        .failures
                        .push(format!("{} at length {length}: {e}", measure.name()));
                    report.rows.push(BenchRow {
                        measure: measure.name().to_string(),
                        length,
                        median_ms: None,
                        distance: None,
                    });
                }
            }
        }
    }
    Ok(report)
}

fn bench_cell(measure: &Measure, length: usize, repeats: usize) -> Result<(f64, f64)> {
    let mut times = Vec::with_capacity(repeats);
    let mut distance = 0.0;
    for r in 0..repeats {
        let seed = (length as u64) << 16 | r as u64;
        let x = generate(&GeneratorSpec::sine(length, BENCH_NOISE_SIGMA, 2 * seed))?;
        let y = generate(&GeneratorSpec::sine(length, BENCH_NOISE_SIGMA, 2 * seed + 1))?;
        let start = Instant::now();
        let d = measure_distance(&x, &y, measure)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        if r == 0 {
            distance = d;
        }
    }
    Ok((median_of(times), distance))
}
