//! Command-line front end.
//!
//! Machine output (numbers, JSON, CSV) goes to stdout or to `--emit` files;
//! diagnostics go to stderr. Exit codes: 0 success, 1 invalid input or
//! configuration, 2 runtime or solver failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::graph::GraphDetrendConfig;
use crate::io::{load_series, SeriesFormat};
use crate::lof::{auc_score, detect_outliers_with, inject_noise, LofConfig, NoiseKind};
use crate::periodicity::{default_detrend, default_threshold, detect_periodicity_with, PeriodicityConfig};
use crate::robust::{robust_dtw, Measure, RobustDtwConfig};
use crate::series::TimeSeries;
use crate::synth::run_scaling_bench;
use crate::trend::SolverConfig;

#[derive(Debug, Parser)]
#[command(name = "robustdtw", version, about = "Robust dynamic time warping toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Robust DTW distance between two named series
    Dist(DistArgs),
    /// LOF outlier scores over a collection of series
    Outliers(OutlierArgs),
    /// Slicing periodicity check for a known period
    Period(PeriodArgs),
    /// Runtime scaling benchmark on seeded noisy sines
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct DistArgs {
    /// Series file: CSV with one named column per series, or a JSON object
    #[arg(long)]
    input: PathBuf,
    /// Names of the two series, comma separated
    #[arg(long, value_name = "A,B")]
    pair: String,
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the warping path and final trends as JSON to this file
    #[arg(long, value_name = "FILE")]
    emit_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    Robustdtw,
    Dtw,
    Fastdtw,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InjectArg {
    Spikes,
    Dips,
    Both,
}

#[derive(Debug, Args)]
struct OutlierArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = MeasureArg::Robustdtw)]
    measure: MeasureArg,
    /// LOF neighbourhood size [config lof.k_neighbors, default 30]
    #[arg(long)]
    k: Option<usize>,
    /// Fraction of series labelled as outliers [config lof.contamination, default 0.02]
    #[arg(long)]
    contamination: Option<f64>,
    /// Inject spikes and/or dips into every series before scoring
    #[arg(long, value_enum)]
    inject: Option<InjectArg>,
    /// Injections per series
    #[arg(long, default_value_t = 5)]
    inject_count: usize,
    /// Injection magnitude in robust scale units
    #[arg(long, default_value_t = 10.0)]
    inject_magnitude: f64,
    /// Seed for the injection positions
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV with columns name,label (label 1/0 or true/false); adds the AUC
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON result to this file instead of stdout
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PeriodArgs {
    #[arg(long)]
    input: PathBuf,
    /// Period in samples
    #[arg(long)]
    period: usize,
    /// Decision threshold [config periodicity.threshold, default calibrated per measure]
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = MeasureArg::Robustdtw)]
    measure: MeasureArg,
    /// Only check this series; by default every series in the file is checked
    #[arg(long)]
    series: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Ascending series lengths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024,2048,4096,8192")]
    lengths: Vec<usize>,
    /// Measures to time, comma separated
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dtw,fastdtw,robustdtw")]
    measures: Vec<MeasureArg>,
    /// Timed calls per cell (at least 5)
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the CSV report to this file instead of stdout
    #[arg(long)]
    emit: Option<PathBuf>,
}

/// Optional overrides of the module defaults, read from a JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub self_detrend: SolverConfig,
    pub graph_detrend: GraphDetrendConfig,
    pub radius: usize,
    pub min_level_size: usize,
    pub inner_iterations: usize,
    pub inner_tolerance: f64,
    pub lof: LofConfig,
    pub periodicity: PeriodicitySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodicitySection {
    /// Falls back to the calibrated default of the chosen measure.
    pub threshold: Option<f64>,
    pub iqr_factor: f64,
    pub detrend: SolverConfig,
}

impl Default for PeriodicitySection {
    fn default() -> Self {
        Self {
            threshold: None,
            iqr_factor: 1.5,
            detrend: default_detrend(),
        }
    }
}

impl Default for AppConfig {
    fn default() -> Self {
        let r = RobustDtwConfig::default();
        Self {
            self_detrend: r.self_detrend,
            graph_detrend: r.graph_detrend,
            radius: r.radius,
            min_level_size: r.min_level_size,
            inner_iterations: r.inner_iterations,
            inner_tolerance: r.inner_tolerance,
            lof: LofConfig::default(),
            periodicity: PeriodicitySection::default(),
        }
    }
}

impl AppConfig {
    /// Parses a JSON object of overrides. Nested objects are merged onto the
    /// defaults key by key, so a partial section keeps the remaining defaults.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let user: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if !user.is_object() {
            return Err("configuration must be a JSON object".into());
        }
        let mut merged = serde_json::to_value(AppConfig::default()).expect("defaults serialize");
        merge(&mut merged, user);
        let cfg: AppConfig = serde_json::from_value(merged).map_err(|e| e.to_string())?;
        cfg.robust().validate().map_err(|e| e.to_string())?;
        cfg.lof.validate().map_err(|e| e.to_string())?;
        if let Some(t) = cfg.periodicity.threshold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("periodicity.threshold must be finite and > 0, got {t}"));
            }
        }
        if !(cfg.periodicity.iqr_factor > 0.0 && cfg.periodicity.iqr_factor.is_finite()) {
            return Err(format!(
                "periodicity.iqr_factor must be finite and > 0, got {}",
                cfg.periodicity.iqr_factor
            ));
        }
        cfg.periodicity.detrend.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn robust(&self) -> RobustDtwConfig {
        RobustDtwConfig {
            self_detrend: self.self_detrend,
            graph_detrend: self.graph_detrend,
            radius: self.radius,
            min_level_size: self.min_level_size,
            inner_iterations: self.inner_iterations,
            inner_tolerance: self.inner_tolerance,
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

fn is_runtime(e: &Error) -> bool {
    match e {
        Error::Numerical(_) => true,
        Error::Pair { source, .. } => is_runtime(source),
        _ => false,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if is_runtime(&e) {
            Failure::Runtime(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            // help and version go to stdout, usage errors to stderr
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Dist(a) => dist(a),
        Command::Outliers(a) => outliers(a),
        Command::Period(a) => period(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<AppConfig> {
    let Some(path) = path else {
        return Ok(AppConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    AppConfig::from_json(&text).map_err(|m| Failure::Validation(format!("{}: {m}", path.display())))
}

fn load_input(path: &Path) -> CliResult<Vec<TimeSeries>> {
    let series = load_series(path, SeriesFormat::from_path(path))?;
    if series.is_empty() {
        return Err(Failure::Validation(format!("{}: no series found", path.display())));
    }
    Ok(series)
}

fn series_name(s: &TimeSeries, index: usize) -> String {
    s.name().map(str::to_owned).unwrap_or_else(|| format!("series_{index}"))
}

fn find<'a>(series: &'a [TimeSeries], name: &str, path: &Path) -> CliResult<&'a TimeSeries> {
    series
        .iter()
        .find(|s| s.name() == Some(name))
        .ok_or_else(|| Failure::Validation(format!("{}: no series named '{name}'", path.display())))
}

fn emit(target: Option<&Path>, text: &str) -> CliResult<()> {
    match target {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn measure_of(arg: MeasureArg, cfg: &AppConfig) -> Measure {
    match arg {
        MeasureArg::Robustdtw => Measure::Robust(cfg.robust()),
        MeasureArg::Dtw => Measure::Dtw,
        MeasureArg::Fastdtw => Measure::FastDtw { radius: cfg.radius },
        MeasureArg::Euclidean => Measure::Euclidean,
    }
}

fn dist(a: DistArgs) -> CliResult<()> {
    let cfg = load_config(a.config.as_deref())?;
    let series = load_input(&a.input)?;
    let (first, second) = a.pair.split_once(',').ok_or_else(|| {
        Failure::Validation(format!(
            "--pair expects two names separated by a comma, got '{}'",
            a.pair
        ))
    })?;
    let x = find(&series, first.trim(), &a.input)?;
    let y = find(&series, second.trim(), &a.input)?;
    let result = robust_dtw(x, y, &cfg.robust())?;
    if !result.converged {
        eprintln!("warning: a trend solver stopped at its iteration limit");
    }
    for note in &result.notes {
        eprintln!("note: {note}");
    }
    println!("{:?}", result.distance);
    if let Some(path) = &a.emit_path {
        let doc = json!({
            "distance": result.distance,
            "converged": result.converged,
            "path": result.path,
            "window": result.window,
            "x_trend": result.final_trends.0.values(),
            "y_trend": result.final_trends.1.values(),
            "level_trace": result.level_trace,
        });
        emit(Some(path), &to_json_text(&doc))?;
    }
    Ok(())
}

fn parse_bool(text: &str) -> Option<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn load_truth(path: &Path, names: &[String]) -> CliResult<Vec<bool>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut labels = std::collections::BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        let bad = || Failure::Validation(format!("{}: row {} must be name,label", path.display(), row + 1));
        if record.len() != 2 {
            return Err(bad());
        }
        let label = parse_bool(&record[1]).ok_or_else(bad)?;
        labels.insert(record[0].to_string(), label);
    }
    names
        .iter()
        .map(|n| {
            labels
                .get(n)
                .copied()
                .ok_or_else(|| Failure::Validation(format!("{}: no label for series '{n}'", path.display())))
        })
        .collect()
}

fn outliers(a: OutlierArgs) -> CliResult<()> {
    let cfg = load_config(a.config.as_deref())?;
    let mut series = load_input(&a.input)?;
    let lof = LofConfig {
        k_neighbors: a.k.unwrap_or(cfg.lof.k_neighbors),
        contamination: a.contamination.unwrap_or(cfg.lof.contamination),
    };
    lof.validate()?;
    let names: Vec<String> = series.iter().enumerate().map(|(i, s)| series_name(s, i)).collect();
    let truth = a.truth.as_deref().map(|p| load_truth(p, &names)).transpose()?;
    if let Some(kind) = a.inject {
        let kind = match kind {
            InjectArg::Spikes => NoiseKind::Spikes,
            InjectArg::Dips => NoiseKind::Dips,
            InjectArg::Both => NoiseKind::Both,
        };
        series = series
            .iter()
            .enumerate()
            .map(|(i, s)| {
                inject_noise(
                    s,
                    kind,
                    a.inject_count,
                    a.inject_magnitude,
                    a.seed.wrapping_add(i as u64),
                )
            })
            .collect::<crate::Result<_>>()?;
    }
    let measure = measure_of(a.measure, &cfg);
    let result = detect_outliers_with(&series, &measure, &lof)?;
    let rows: Vec<Value> = names
        .iter()
        .zip(result.scores.iter().zip(&result.labels))
        .map(|(n, (s, l))| json!({"name": n, "score": s, "label": l}))
        .collect();
    let mut doc = json!({
        "measure": measure.name(),
        "k_neighbors": lof.k_neighbors,
        "contamination": lof.contamination,
        "threshold": result.threshold,
        "series": rows,
    });
    if let Some(t) = &truth {
        doc["auc"] = json!(auc_score(&result.scores, t)?);
    }
    emit(a.emit.as_deref(), &to_json_text(&doc))
}

fn period(a: PeriodArgs) -> CliResult<()> {
    let cfg = load_config(a.config.as_deref())?;
    let series = load_input(&a.input)?;
    let measure = measure_of(a.measure, &cfg);
    let pc = PeriodicityConfig {
        period: a.period,
        threshold: a
            .threshold
            .or(cfg.periodicity.threshold)
            .unwrap_or_else(|| default_threshold(&measure)),
        iqr_factor: cfg.periodicity.iqr_factor,
        dtw_config: cfg.robust(),
        detrend: cfg.periodicity.detrend,
    };
    pc.validate()?;
    let selected: Vec<(String, &TimeSeries)> = match &a.series {
        Some(name) => vec![(name.clone(), find(&series, name, &a.input)?)],
        None => series.iter().enumerate().map(|(i, s)| (series_name(s, i), s)).collect(),
    };
    let mut results = Vec::with_capacity(selected.len());
    for (name, s) in selected {
        let r = detect_periodicity_with(s, &pc, &measure)?;
        for note in &r.notes {
            eprintln!("note ({name}): {note}");
        }
        results.push(json!({
            "name": name,
            "is_periodic": r.is_periodic,
            "score": r.score,
            "segment_distances": r.segment_distances,
            "retained_mask": r.retained_mask,
        }));
    }
    let doc = json!({
        "measure": measure.name(),
        "period": pc.period,
        "threshold": pc.threshold,
        "results": results,
    });
    emit(a.emit.as_deref(), &to_json_text(&doc))
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let cfg = load_config(a.config.as_deref())?;
    let measures: Vec<Measure> = a.measures.iter().map(|&m| measure_of(m, &cfg)).collect();
    let report = run_scaling_bench(&a.lengths, &measures, a.repeats)?;
    for f in &report.failures {
        eprintln!("warning: {f}");
    }
    emit(a.emit.as_deref(), &report.to_csv()?)
}
