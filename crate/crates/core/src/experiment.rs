//! Experiment files and the `urnlab` driver.
//!
//! An experiment is a TOML file:
//!
//! ```toml
//! model = "opposite"          # or "equal_addition" (aliases model1, model2)
//! draw_size = 2
//! initial_white = 5
//! initial_black = 5
//! horizon = 10000
//! replicates = 500
//! seed = 20240601
//!
//! [law_x]
//! family = "uniform"
//! low = 1
//! high = 3
//!
//! [law_y]
//! family = "uniform"
//! low = 2
//! high = 6
//!
//! [tests]
//! enabled = ["slln_z", "slln_t"]
//! ```
//!
//! `run` writes `summary.json`, `trajectories.csv` and `clt_samples.csv`
//! (or their `.json` twins) and exits 0 when every enabled test passes,
//! 1 on a failed test, 2 on a configuration error and 3 on a runtime error.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{AdditionLaw, LawSchedule};
use crate::ensemble::{
    self, needs_diagnostics, CltSample, EnsembleReport, EnsembleSpec, EnsembleSummary, Prediction,
    ReplicateOutput, Tolerances, EQUAL_ADDITION_TESTS, OPPOSITE_TESTS,
};
use crate::urn::{CheckpointGrid, UrnConfig, Variant};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    TestFailure = 1,
    ConfigError = 2,
    RuntimeError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("runtime: {0}")]
    Runtime(String),
}

impl ExperimentError {
    pub fn status(&self) -> ExitStatus {
        match self {
            ExperimentError::Config(_) => ExitStatus::ConfigError,
            ExperimentError::Runtime(_) => ExitStatus::RuntimeError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[serde(alias = "model1")]
    Opposite,
    #[serde(alias = "model2")]
    EqualAddition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSelection {
    /// Empty means every test defined for the model.
    #[serde(default)]
    pub enabled: Vec<String>,
    /// Exponent of `theta_n = n^lambda` for the equal-addition checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    /// Write per-checkpoint paths of every replicate.
    #[serde(default = "yes")]
    pub trajectories: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("urnlab_out")
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            format: OutputFormat::Csv,
            trajectories: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub draw_size: u64,
    pub initial_white: u64,
    pub initial_black: u64,
    pub horizon: u64,
    pub replicates: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law_x: Option<AdditionLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law_y: Option<AdditionLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<LawSchedule>,
    #[serde(default)]
    pub checkpoints: CheckpointGrid,
    #[serde(default)]
    pub tests: TestSelection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self, ExperimentError> {
        let config: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| ExperimentError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Read a file and apply `key=value` overrides (dotted keys reach into
    /// tables, e.g. `law_x.high=4`).
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            ExperimentError::Config(format!("{}: {e}", path.display()))
        })?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn urn_config(&self) -> Result<UrnConfig, ExperimentError> {
        let variant = match self.model {
            ModelKind::Opposite => {
                let missing =
                    |f: &str| ExperimentError::Config(format!("model \"opposite\" needs [{f}]"));
                Variant::Opposite {
                    law_x: self.law_x.clone().ok_or_else(|| missing("law_x"))?,
                    law_y: self.law_y.clone().ok_or_else(|| missing("law_y"))?,
                }
            }
            ModelKind::EqualAddition => Variant::EqualAddition {
                schedule: self.schedule.clone().ok_or_else(|| {
                    ExperimentError::Config("model \"equal_addition\" needs [schedule]".into())
                })?,
            },
        };
        UrnConfig::new(
            self.draw_size,
            self.initial_white,
            self.initial_black,
            variant,
            self.horizon,
        )
        .map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.replicates < 2 {
            return Err(ExperimentError::Config(format!(
                "replicates must be at least 2 (got {})",
                self.replicates
            )));
        }
        if self.seed > i64::MAX as u64 {
            return Err(ExperimentError::Config(format!(
                "seed {} exceeds {}, the largest integer a config file can hold",
                self.seed,
                i64::MAX
            )));
        }
        self.urn_config()?;
        self.checkpoints
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        let known = self.known_tests();
        for t in &self.tests.enabled {
            if !known.contains(&t.as_str()) {
                return Err(ExperimentError::Config(format!(
                    "unknown test \"{t}\" for this model; known: {}",
                    known.join(", ")
                )));
            }
        }
        let tol = &self.tolerances;
        for (name, v) in [
            ("variance_rel", tol.variance_rel),
            ("mean_se", tol.mean_se),
            ("ks_p", tol.ks_p),
            ("slln_rel", tol.slln_rel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ExperimentError::Config(format!(
                    "tolerances.{name} must be positive"
                )));
            }
        }
        Ok(())
    }

    fn known_tests(&self) -> &'static [&'static str] {
        match self.model {
            ModelKind::Opposite => OPPOSITE_TESTS,
            ModelKind::EqualAddition => EQUAL_ADDITION_TESTS,
        }
    }

    pub fn enabled_tests(&self) -> Vec<String> {
        if self.tests.enabled.is_empty() {
            self.known_tests().iter().map(|s| s.to_string()).collect()
        } else {
            self.tests.enabled.clone()
        }
    }

    pub fn ensemble_spec(&self, threads: Option<usize>) -> Result<EnsembleSpec, ExperimentError> {
        let mut spec = EnsembleSpec::new(self.urn_config()?, self.replicates, self.seed);
        spec.grid = self.checkpoints.clone();
        spec.threads = threads;
        spec.diagnostics = self.enabled_tests().iter().any(|t| needs_diagnostics(t));
        spec.lambda = self.tests.lambda;
        Ok(spec)
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ExperimentError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        ExperimentError::Config(format!("override \"{assignment}\" is not key=value"))
    })?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| {
        ExperimentError::Config(format!("override \"{assignment}\" has an empty key"))
    })?;
    let mut node = table;
    for part in parts {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            ExperimentError::Config(format!("override key \"{key}\": {part} is not a table"))
        })?;
    }
    node.insert(leaf.to_string(), value);
    Ok(())
}

/// Command-line settings that override the file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub replicates: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

/// `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema_version: u32,
    /// The experiment, with the output section left at its defaults.
    pub config: ExperimentConfig,
    pub prediction: Prediction,
    pub ensemble: EnsembleSummary,
    pub all_pass: bool,
}

/// Format a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_trajectories_csv(
    w: &mut impl Write,
    outputs: &[ReplicateOutput],
) -> std::io::Result<()> {
    writeln!(w, "replicate,n,W,B,T,Z")?;
    let mut line = String::new();
    for o in outputs {
        for s in &o.checkpoints {
            line.clear();
            let _ = write!(
                line,
                "{},{},{},{},{},{}",
                o.replicate,
                s.step,
                s.white,
                s.black,
                s.total(),
                format_float(s.proportion())
            );
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

pub fn write_clt_csv(w: &mut impl Write, samples: &[CltSample]) -> std::io::Result<()> {
    writeln!(w, "replicate,kind,value")?;
    for s in samples {
        writeln!(w, "{},{},{}", s.replicate, s.kind, format_float(s.value))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TrajectoryRow {
    replicate: u64,
    n: u64,
    #[serde(rename = "W")]
    white: u64,
    #[serde(rename = "B")]
    black: u64,
    #[serde(rename = "T")]
    total: u64,
    #[serde(rename = "Z")]
    proportion: f64,
}

fn runtime(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Runtime(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, ExperimentError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

/// Everything `run` produced, for callers that want more than the exit code.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: SummaryFile,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl RunResult {
    pub fn status(&self) -> ExitStatus {
        if self.summary.all_pass {
            ExitStatus::Pass
        } else {
            ExitStatus::TestFailure
        }
    }
}

pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunResult, ExperimentError> {
    let mut config = ExperimentConfig::load(config_path, &opts.overrides)?;
    if let Some(s) = opts.seed {
        config.seed = s;
    }
    if let Some(r) = opts.replicates {
        config.replicates = r;
    }
    if let Some(out) = &opts.out {
        config.output.dir = out.clone();
    }
    if let Some(f) = opts.format {
        config.output.format = f;
    }
    run_config(&config, opts.threads)
}

pub fn run_config(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<RunResult, ExperimentError> {
    config.validate()?;
    if threads == Some(0) {
        return Err(ExperimentError::Config("--threads must be positive".into()));
    }
    let spec = config.ensemble_spec(threads)?;
    let urn = spec.config.clone();
    let prediction = ensemble::predict(&urn).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let outputs = ensemble::run_ensemble(&spec).map_err(|e| match e {
        ensemble::EnsembleError::Config(m) => ExperimentError::Config(m),
        other => runtime(other),
    })?;
    let EnsembleReport {
        summary,
        clt_samples,
    } = ensemble::summarize(&spec, &outputs, &config.enabled_tests(), &config.tolerances)
        .map_err(runtime)?;

    let dir = config.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();

    let mut recorded = config.clone();
    recorded.output = OutputSpec::default();
    let all_pass = summary.all_pass();
    let file = SummaryFile {
        schema_version: SCHEMA_VERSION,
        config: recorded,
        prediction,
        ensemble: summary,
        all_pass,
    };
    let path = dir.join("summary.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &file).map_err(runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(runtime)?;
    files.push(path);

    let ext = match config.output.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    if config.output.trajectories {
        let path = dir.join(format!("trajectories.{ext}"));
        let mut w = create(&path)?;
        match config.output.format {
            OutputFormat::Csv => write_trajectories_csv(&mut w, &outputs).map_err(runtime)?,
            OutputFormat::Json => {
                let rows: Vec<TrajectoryRow> = outputs
                    .iter()
                    .flat_map(|o| {
                        o.checkpoints.iter().map(|s| TrajectoryRow {
                            replicate: o.replicate,
                            n: s.step,
                            white: s.white,
                            black: s.black,
                            total: s.total(),
                            proportion: s.proportion(),
                        })
                    })
                    .collect();
                serde_json::to_writer(&mut w, &rows).map_err(runtime)?;
            }
        }
        w.flush().map_err(runtime)?;
        files.push(path);
    }
    let path = dir.join(format!("clt_samples.{ext}"));
    let mut w = create(&path)?;
    match config.output.format {
        OutputFormat::Csv => write_clt_csv(&mut w, &clt_samples).map_err(runtime)?,
        OutputFormat::Json => serde_json::to_writer(&mut w, &clt_samples).map_err(runtime)?,
    }
    w.flush().map_err(runtime)?;
    files.push(path);

    Ok(RunResult {
        summary: file,
        out_dir: dir,
        files,
    })
}

/// The closed-form prediction for a config file, as pretty JSON.
pub fn predict(config_path: &Path, overrides: &[String]) -> Result<String, ExperimentError> {
    let config = ExperimentConfig::load(config_path, overrides)?;
    let p = ensemble::predict(&config.urn_config()?)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    serde_json::to_string_pretty(&p).map_err(runtime)
}

/// A short plain-text table of test verdicts.
pub fn render_report(summary: &SummaryFile) -> String {
    let mut out = String::new();
    let e = &summary.ensemble;
    let _ = writeln!(
        out,
        "replicates {}  horizon {}  seed {}",
        e.replicates, e.horizon, e.seed
    );
    for t in &e.tests {
        let _ = writeln!(
            out,
            "{:<4} {:<24} statistic {:>12.6}  threshold {:>10.6}{}",
            if t.pass { "ok" } else { "FAIL" },
            t.name,
            t.statistic,
            t.threshold,
            t.p_value.map(|p| format!("  p {p:.4}")).unwrap_or_default()
        );
    }
    let _ = writeln!(
        out,
        "{}",
        if summary.all_pass {
            "all tests pass"
        } else {
            "some tests failed"
        }
    );
    out
}
