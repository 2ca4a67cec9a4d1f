//! Scenario documents, the experiment runner and the analytic comparison.
//!
//! A scenario is a TOML document with the sections `model`, `process`,
//! `marks`, `run` and `output`:
//!
//! ```toml
//! [model]
//! kind = "restart"
//!
//! [process]
//! kind = "renewal"
//! sizes = "exp(2)"
//!
//! [marks]
//! law = "exp(1)"
//!
//! [run]
//! iterations = 100000
//! replications = 4
//! seed = 7
//! ```

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::analytic::{expected_checkpoint_time, expected_restart_time, Classification, ExpectedTime};
use crate::checkpoint::{checkpoint_efficiency, run_checkpointing, CheckpointConfig, DEFAULT_BURN_IN, DEFAULT_SCAN_CAP};
use crate::dist::Distribution;
use crate::procgen::{Initial, MarkedWindow, MarkovRenewalSpec, ProcessLaw};
use crate::restart::{
    efficiency_curve, mrp_efficiency, run_restart, EfficiencyEstimate, RestartConfig, Sampling, Trend, DEFAULT_AGGREGATE_THRESHOLD,
    DEFAULT_ATTEMPT_CAP, DEFAULT_TOLERANCE,
};
use crate::rng::StreamKey;
use crate::rwalk::{estimate_walk_constants, simulate_walk_restart, walk_efficiency};
use crate::stats::{batch_means_se, mean_se, ratio_se};
use crate::universal::{
    compute_n_process, compute_trajectory_map, default_lookback, kernel_report, kernel_stationary, verify_universal,
    KernelForm,
};

/// JSON schema that every `summary.json` satisfies.
pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.schema.json");
pub const SCHEMA_VERSION: &str = "failsim-summary/1";

const DEFAULT_SEED: u64 = 0;
const DEFAULT_CURVE_POINTS: usize = 40;
const DEFAULT_WALKS: usize = 20_000;
const DEFAULT_KERNEL_ROWS: usize = 3;
/// States of the truncated N-chain used for its stationary law.
const KERNEL_STATES: usize = 40;

// ---------------------------------------------------------------------------
// errors

/// A problem with one field of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {}): {}", self.field, l, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Syntax(String),
    #[error("invalid override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid scenario:\n{}", list(.0))]
    Invalid(Vec<FieldError>),
}

fn list(errs: &[FieldError]) -> String {
    errs.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("replication {replication}: {message}")]
    Pathology { replication: usize, message: String },
    #[error("output: {0}")]
    Output(String),
}

impl RunError {
    /// Process exit status: 2 for scenario problems, 3 for engine pathologies.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Scenario(_) => 2,
            Self::Pathology { .. } => 3,
            Self::Output(_) => 1,
        }
    }
}

fn output_err<E: fmt::Display>(e: E) -> RunError {
    RunError::Output(e.to_string())
}

// ---------------------------------------------------------------------------
// raw document

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    model: RawModel,
    process: RawProcess,
    marks: RawMarks,
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    lookback: Option<usize>,
    burn_in: Option<usize>,
    p: Option<f64>,
    attempt_cap: Option<u64>,
    scan_cap: Option<usize>,
    sampling: Option<String>,
    aggregate_threshold: Option<f64>,
    walks: Option<usize>,
    kernel_rows: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcess {
    kind: String,
    sizes: Option<toml::Value>,
    p0: Option<f64>,
    states: Option<Vec<String>>,
    transition: Option<Vec<Vec<f64>>>,
    initial: Option<toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarks {
    law: Option<toml::Value>,
    regime0: Option<String>,
    regime1: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    iterations: usize,
    replications: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    traces: Option<bool>,
    curve_points: Option<usize>,
}

// ---------------------------------------------------------------------------
// validated scenario

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Restart,
    Checkpoint,
    Universal,
    Rwalk,
    Analytic,
}

impl ModelKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "restart" => Self::Restart,
            "checkpoint" => Self::Checkpoint,
            "universal" => Self::Universal,
            "rwalk" => Self::Rwalk,
            "analytic" => Self::Analytic,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Restart => "restart",
            Self::Checkpoint => "checkpoint",
            Self::Universal => "universal",
            Self::Rwalk => "rwalk",
            Self::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone)]
pub enum ProcessSpec {
    Renewal {
        sizes: Distribution,
        marks: Distribution,
    },
    Markov(Arc<MarkovRenewalSpec>),
    Mixture {
        sizes: Distribution,
        marks0: Distribution,
        marks1: Distribution,
        p0: f64,
    },
}

impl ProcessSpec {
    pub fn window(&self, key: StreamKey) -> MarkedWindow {
        let law = match self {
            Self::Renewal { sizes, marks } => ProcessLaw::Renewal {
                sizes: sizes.clone(),
                marks: marks.clone(),
            },
            Self::Markov(spec) => ProcessLaw::Markov(spec.clone()),
            Self::Mixture {
                sizes,
                marks0,
                marks1,
                p0,
            } => ProcessLaw::Mixture {
                sizes: sizes.clone(),
                marks0: marks0.clone(),
                marks1: marks1.clone(),
                p0: *p0,
            },
        };
        MarkedWindow::new(law, key)
    }

    /// Size law and the mark law in force for a window's regime.
    fn renewal_laws(&self, regime: Option<u8>) -> Option<(&Distribution, &Distribution)> {
        match self {
            Self::Renewal { sizes, marks } => Some((sizes, marks)),
            Self::Mixture {
                sizes, marks0, marks1, ..
            } => Some((sizes, if regime == Some(0) { marks0 } else { marks1 })),
            Self::Markov(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub traces: bool,
    pub curve_points: usize,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: ModelKind,
    pub process: ProcessSpec,
    pub iterations: usize,
    pub replications: usize,
    pub seed: u64,
    pub restart: RestartConfig,
    pub checkpoint: CheckpointConfig,
    pub burn_in: usize,
    pub lookback: Option<usize>,
    pub p: f64,
    pub walks: usize,
    pub kernel_rows: usize,
    pub output: OutputSpec,
    /// sha256 of the resolved document, overrides included.
    pub hash: String,
}

// ---------------------------------------------------------------------------
// loading

/// Splits `key=value`, expanding the short keys `N`, `R`, `seed`, `p`, `B`.
pub fn parse_override(s: &str) -> Result<(String, String), ScenarioError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ScenarioError::Override(s.into()))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(ScenarioError::Override(s.into()));
    }
    let path = match k {
        "N" => "run.iterations",
        "R" => "run.replications",
        "seed" => "run.seed",
        "p" => "model.p",
        "B" => "model.lookback",
        other => other,
    };
    Ok((path.to_string(), v.trim().to_string()))
}

fn override_value(v: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()))
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ScenarioError> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut t = table;
    for p in parts {
        t = t
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ScenarioError::Override(format!("{path}: `{p}` is not a section")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

pub fn load_scenario_file(path: &Path, overrides: &[(String, String)]) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    load_scenario(&text, overrides)
}

/// Parses, applies the overrides and validates a scenario document.
pub fn load_scenario(text: &str, overrides: &[(String, String)]) -> Result<Scenario, ScenarioError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let resolved_text = if overrides.is_empty() {
        text.to_string()
    } else {
        for (k, v) in overrides {
            set_path(&mut table, k, override_value(v))?;
        }
        toml::to_string(&table).map_err(|e| ScenarioError::Syntax(e.to_string()))?
    };
    let raw: RawScenario = toml::from_str(&resolved_text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    // hash a canonical rendering so formatting and comments do not matter
    let canonical = toml::to_string(&table).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
    Validator {
        text: &resolved_text,
        errors: Vec::new(),
    }
    .finish(raw, hash)
}

struct Validator<'a> {
    text: &'a str,
    errors: Vec<FieldError>,
}

impl Validator<'_> {
    /// Line of `key` inside `[section]`, for error messages.
    fn locate(&self, field: &str) -> Option<usize> {
        let mut parts = field.split('.');
        let section = parts.next()?;
        let key = parts.next()?.split('[').next()?;
        let header = format!("[{section}]");
        let mut inside = false;
        for (i, line) in self.text.lines().enumerate() {
            let t = line.trim();
            if t.starts_with('[') {
                inside = t == header;
            } else if inside {
                if let Some((k, _)) = t.split_once('=') {
                    if k.trim() == key {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    fn error(&mut self, field: &str, message: impl Into<String>) {
        let line = self.locate(field);
        self.errors.push(FieldError {
            field: field.to_string(),
            line,
            message: message.into(),
        });
    }

    fn dist(&mut self, field: &str, s: &str) -> Option<Distribution> {
        match s.parse::<Distribution>() {
            Ok(d) => Some(d),
            Err(e) => {
                self.error(field, e.to_string());
                None
            }
        }
    }

    fn dist_value(&mut self, field: &str, v: Option<&toml::Value>) -> Option<Distribution> {
        match v {
            Some(toml::Value::String(s)) => self.dist(field, s),
            Some(_) => {
                self.error(field, "expected a distribution such as \"exp(1)\"");
                None
            }
            None => {
                self.error(field, "missing");
                None
            }
        }
    }

    /// A k x k table of distributions; empty strings mark absent transitions.
    fn dist_table(&mut self, field: &str, v: Option<&toml::Value>, k: usize) -> Option<Vec<Vec<Option<Distribution>>>> {
        let rows = match v.and_then(|v| v.as_array()) {
            Some(r) if r.len() == k => r,
            _ => {
                self.error(field, format!("expected a {k}x{k} array of distributions"));
                return None;
            }
        };
        let mut out = Vec::with_capacity(k);
        let mut ok = true;
        for (i, row) in rows.iter().enumerate() {
            let cells = match row.as_array() {
                Some(c) if c.len() == k => c,
                _ => {
                    self.error(&format!("{field}[{i}]"), format!("expected {k} entries"));
                    ok = false;
                    continue;
                }
            };
            let mut r = Vec::with_capacity(k);
            for (j, c) in cells.iter().enumerate() {
                let f = format!("{field}[{i}][{j}]");
                match c.as_str() {
                    Some("") => r.push(None),
                    Some(s) => {
                        let d = self.dist(&f, s);
                        ok &= d.is_some();
                        r.push(d);
                    }
                    None => {
                        self.error(&f, "expected a string");
                        ok = false;
                    }
                }
            }
            out.push(r);
        }
        ok.then_some(out)
    }

    fn marks_unbounded(&mut self, field: &str, l: &Distribution) {
        if !l.has_unbounded_support() {
            self.error(field, format!("failure law {l} has bounded support; some tasks could never finish"));
        }
    }

    fn process(&mut self, raw: &RawProcess, marks: &RawMarks) -> Option<ProcessSpec> {
        match raw.kind.as_str() {
            "renewal" => {
                let sizes = self.dist_value("process.sizes", raw.sizes.as_ref());
                let l = self.dist_value("marks.law", marks.law.as_ref());
                if let Some(l) = &l {
                    self.marks_unbounded("marks.law", l);
                }
                Some(ProcessSpec::Renewal { sizes: sizes?, marks: l? })
            }
            "mixture" => {
                let sizes = self.dist_value("process.sizes", raw.sizes.as_ref());
                let l0 = marks.regime0.as_deref().map(|s| self.dist("marks.regime0", s));
                let l1 = marks.regime1.as_deref().map(|s| self.dist("marks.regime1", s));
                let p0 = raw.p0.unwrap_or(0.5);
                if !(0.0..=1.0).contains(&p0) {
                    self.error("process.p0", format!("must lie in [0, 1], got {p0}"));
                }
                let (l0, l1) = match (l0, l1) {
                    (Some(a), Some(b)) => (a?, b?),
                    _ => {
                        self.error("marks.regime0", "mixture needs marks.regime0 and marks.regime1");
                        return None;
                    }
                };
                self.marks_unbounded("marks.regime0", &l0);
                self.marks_unbounded("marks.regime1", &l1);
                Some(ProcessSpec::Mixture {
                    sizes: sizes?,
                    marks0: l0,
                    marks1: l1,
                    p0,
                })
            }
            "markov" => {
                let states = match &raw.states {
                    Some(s) if !s.is_empty() => s.clone(),
                    _ => {
                        self.error("process.states", "markov process needs a list of states");
                        return None;
                    }
                };
                let k = states.len();
                let transition = match &raw.transition {
                    Some(t) => t.clone(),
                    None => {
                        self.error("process.transition", "missing");
                        return None;
                    }
                };
                let initial = match &raw.initial {
                    None => Initial::Stationary,
                    Some(toml::Value::String(s)) if s == "stationary" => Initial::Stationary,
                    Some(toml::Value::Array(a)) => match a.iter().map(|x| x.as_float().or(x.as_integer().map(|i| i as f64))).collect() {
                        Some(v) => Initial::Vector(v),
                        None => {
                            self.error("process.initial", "expected numbers");
                            return None;
                        }
                    },
                    Some(_) => {
                        self.error("process.initial", "expected \"stationary\" or a probability vector");
                        return None;
                    }
                };
                let sizes = self.dist_table("process.sizes", raw.sizes.as_ref(), k);
                let marks = self.dist_table("marks.law", marks.law.as_ref(), k);
                let (sizes, marks) = (sizes?, marks?);
                match MarkovRenewalSpec::new(states, transition, initial, sizes, marks) {
                    Ok(spec) => Some(ProcessSpec::Markov(Arc::new(spec))),
                    Err(e) => {
                        let field = match &e {
                            crate::procgen::ProcessError::Initial(_) => "process.initial",
                            crate::procgen::ProcessError::Law { .. } | crate::procgen::ProcessError::MissingLaw { .. } => {
                                "process.sizes"
                            }
                            _ => "process.transition",
                        };
                        self.error(field, e.to_string());
                        None
                    }
                }
            }
            other => {
                self.error("process.kind", format!("unknown process `{other}`; expected renewal, markov or mixture"));
                None
            }
        }
    }

    fn finish(mut self, raw: RawScenario, hash: String) -> Result<Scenario, ScenarioError> {
        let model = ModelKind::parse(&raw.model.kind);
        if model.is_none() {
            self.error(
                "model.kind",
                format!("unknown model `{}`; expected restart, checkpoint, universal, rwalk or analytic", raw.model.kind),
            );
        }
        let process = self.process(&raw.process, &raw.marks);
        let m = &raw.model;
        let sampling = match m.sampling.as_deref() {
            None | Some("auto") => Sampling::Auto {
                threshold: m.aggregate_threshold.unwrap_or(DEFAULT_AGGREGATE_THRESHOLD),
            },
            Some("exact") => Sampling::Exact,
            Some(other) => {
                self.error("model.sampling", format!("expected auto or exact, got `{other}`"));
                Sampling::Exact
            }
        };
        if let Some(t) = m.aggregate_threshold {
            if !(t >= 1.0) {
                self.error("model.aggregate_threshold", "must be at least 1");
            }
        }
        let attempt_cap = m.attempt_cap.unwrap_or(DEFAULT_ATTEMPT_CAP);
        if attempt_cap == 0 {
            self.error("model.attempt_cap", "must be positive");
        }
        let scan_cap = m.scan_cap.unwrap_or(DEFAULT_SCAN_CAP);
        let p = m.p.unwrap_or(0.0);
        if !(0.0..0.5).contains(&p) {
            self.error("model.p", format!("down-step probability must lie in [0, 1/2), got {p}"));
        }
        if raw.run.iterations == 0 {
            self.error("run.iterations", "must be positive");
        }
        let replications = raw.run.replications.unwrap_or(1);
        if replications == 0 {
            self.error("run.replications", "must be positive");
        }
        let lookback = m.lookback;
        if let (Some(model), Some(process)) = (model, &process) {
            self.model_checks(model, process, lookback, raw.run.iterations);
        }
        let curve_points = raw.output.curve_points.unwrap_or(DEFAULT_CURVE_POINTS);
        if !self.errors.is_empty() {
            return Err(ScenarioError::Invalid(self.errors));
        }
        Ok(Scenario {
            model: model.expect("checked"),
            process: process.expect("checked"),
            iterations: raw.run.iterations,
            replications,
            seed: raw.run.seed.unwrap_or(DEFAULT_SEED),
            restart: RestartConfig { attempt_cap, sampling },
            checkpoint: CheckpointConfig {
                attempt_cap,
                scan_cap,
                sampling,
            },
            burn_in: m.burn_in.unwrap_or(DEFAULT_BURN_IN),
            lookback,
            p,
            walks: m.walks.unwrap_or(DEFAULT_WALKS),
            kernel_rows: m.kernel_rows.unwrap_or(DEFAULT_KERNEL_ROWS),
            output: OutputSpec {
                dir: raw.output.dir.map(PathBuf::from),
                traces: raw.output.traces.unwrap_or(true),
                curve_points,
            },
            hash,
        })
    }

    fn model_checks(&mut self, model: ModelKind, process: &ProcessSpec, lookback: Option<usize>, iterations: usize) {
        match model {
            ModelKind::Universal => {
                let marks: Vec<(&str, &Distribution)> = match process {
                    ProcessSpec::Renewal { marks, .. } => vec![("marks.law", marks)],
                    ProcessSpec::Mixture { marks0, marks1, .. } => vec![("marks.regime0", marks0), ("marks.regime1", marks1)],
                    ProcessSpec::Markov(_) => {
                        self.error("process.kind", "universal needs i.i.d. sizes: use renewal or mixture");
                        return;
                    }
                };
                for (field, l) in marks {
                    if l.exponential_rate().is_none() {
                        self.error(field, format!("universal checkpoints need exponential marks, got {l}"));
                    } else if lookback.is_none() {
                        let (d, lambda) = (process.renewal_laws(Some(0)).expect("renewal").0, l.exponential_rate().unwrap());
                        if default_lookback(d, lambda) > iterations {
                            self.error("model.lookback", "the default lookback exceeds run.iterations");
                        }
                    }
                }
                if let Some(b) = lookback {
                    if b == 0 || b > iterations {
                        self.error("model.lookback", format!("must lie in 1..={iterations}"));
                    }
                }
            }
            ModelKind::Rwalk => {
                if matches!(process, ProcessSpec::Markov(_)) {
                    self.error("process.kind", "rwalk needs a two-sided window: use renewal or mixture");
                }
            }
            ModelKind::Analytic => {
                if matches!(process, ProcessSpec::Mixture { .. }) {
                    self.error("process.kind", "analytic supports renewal and markov processes");
                }
            }
            ModelKind::Restart | ModelKind::Checkpoint => {}
        }
    }
}

// ---------------------------------------------------------------------------
// running

/// Numbers a replication contributes to the comparison report.
#[derive(Debug, Clone, Default)]
struct RepStats {
    regime: Option<u8>,
    efficiency: f64,
    efficiency_se: f64,
    trend: Option<Trend>,
    mean_actual: f64,
    mean_actual_se: f64,
    /// Running mean of the actual time at each decade up to N.
    decade_means: Vec<(usize, f64)>,
    mean_attempts: f64,
    mean_attempts_se: f64,
    zero_fraction: f64,
    zero_fraction_se: f64,
    kernel_inside: Vec<(usize, bool)>,
    shared_inside: Vec<(usize, bool)>,
}

struct RepOutput {
    json: Value,
    stats: RepStats,
    curve: Vec<(usize, f64)>,
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn trend_name(t: Trend) -> &'static str {
    match t {
        Trend::Stable => "stable",
        Trend::Decreasing => "decreasing",
        Trend::Increasing => "increasing",
    }
}

fn estimate_json(e: &EfficiencyEstimate) -> Value {
    json!({
        "ratio": num(e.ratio),
        "window_ratios": e.window_ratios.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        "converged": e.converged,
        "trend": trend_name(e.trend),
    })
}

fn expected_json(e: &ExpectedTime) -> Value {
    json!({
        "value": num(e.value),
        "infinite": e.value.is_infinite(),
        "classification": format!("{:?}", e.classification),
        "abs_error_bound": e.abs_error_bound.map(num),
    })
}

/// Log-spaced sample sizes up to `n`, `n` included.
fn curve_grid(n: usize, points: usize) -> Vec<usize> {
    if points <= 1 || n <= 1 {
        return vec![n];
    }
    let mut out: Vec<usize> = (0..points)
        .map(|i| (10f64.min(n as f64) * (n as f64 / 10f64.min(n as f64)).powf(i as f64 / (points - 1) as f64)).round() as usize)
        .map(|x| x.clamp(1, n))
        .collect();
    out.dedup();
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

fn decades(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 1000;
    while d < n {
        out.push(d);
        d *= 10;
    }
    out.push(n);
    out
}

fn trace_writer(dir: Option<&Path>, r: usize) -> Result<Option<csv::Writer<fs::File>>, RunError> {
    match dir {
        Some(d) => Ok(Some(csv::Writer::from_path(d.join(format!("trace_r{r}.csv"))).map_err(output_err)?)),
        None => Ok(None),
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn run_replication(sc: &Scenario, r: usize, trace_dir: Option<&Path>) -> Result<RepOutput, RunError> {
    let key = StreamKey::new(sc.seed, r as u64);
    let mut window = sc.process.window(key);
    let pathology = |message: String| RunError::Pathology { replication: r, message };
    let n = sc.iterations;
    let grid = curve_grid(n, sc.output.curve_points);
    match sc.model {
        ModelKind::Restart => {
            let recs = run_restart(&mut window, n, &sc.restart).map_err(|e| pathology(e.to_string()))?;
            if let Some(mut w) = trace_writer(trace_dir, r)? {
                w.write_record(["n", "ideal", "failures", "actual", "state", "regime", "aggregated"]).map_err(output_err)?;
                for x in &recs {
                    w.write_record([
                        x.n.to_string(),
                        x.ideal.to_string(),
                        x.failures.to_string(),
                        x.actual.to_string(),
                        opt(x.state),
                        opt(x.regime),
                        x.aggregated.to_string(),
                    ])
                    .map_err(output_err)?;
                }
                w.flush().map_err(output_err)?;
            }
            let pairs: Vec<(f64, f64)> = recs.iter().map(|x| (x.ideal, x.actual)).collect();
            let est = EfficiencyEstimate::from_pairs(pairs.iter().copied(), DEFAULT_TOLERANCE);
            let actual = mean_se(&recs.iter().map(|x| x.actual).collect::<Vec<_>>());
            let ideal = mean_se(&recs.iter().map(|x| x.ideal).collect::<Vec<_>>());
            let mut running = 0.0;
            let marks = decades(n);
            let mut decade_means = Vec::new();
            for (i, x) in recs.iter().enumerate() {
                running += x.actual;
                if marks.contains(&(i + 1)) {
                    decade_means.push((i + 1, running / (i + 1) as f64));
                }
            }
            let aggregated = recs.iter().filter(|x| x.aggregated).count();
            let eff_se = ratio_se(&pairs);
            Ok(RepOutput {
                json: json!({
                    "replication": r,
                    "regime": window.regime(),
                    "efficiency": estimate_json(&est),
                    "efficiency_se": num(eff_se),
                    "mean_actual": num(actual.mean),
                    "mean_actual_se": num(actual.se),
                    "mean_ideal": num(ideal.mean),
                    "aggregated_iterations": aggregated,
                    "running_mean_actual": decade_means.iter().map(|(k, v)| json!({"n": k, "mean": num(*v)})).collect::<Vec<_>>(),
                }),
                stats: RepStats {
                    regime: window.regime(),
                    efficiency: est.ratio,
                    efficiency_se: eff_se,
                    trend: Some(est.trend),
                    mean_actual: actual.mean,
                    mean_actual_se: actual.se,
                    decade_means,
                    ..Default::default()
                },
                curve: efficiency_curve(&pairs, &grid),
            })
        }
        ModelKind::Checkpoint => {
            let recs = run_checkpointing(&mut window, n, &sc.checkpoint).map_err(|e| pathology(e.to_string()))?;
            if let Some(mut w) = trace_writer(trace_dir, r)? {
                w.write_record(["n", "start_index", "end_index", "attempts", "ideal", "actual", "overshoot", "aggregated"])
                    .map_err(output_err)?;
                for x in &recs {
                    w.write_record([
                        x.n.to_string(),
                        x.start_index.to_string(),
                        x.end_index.to_string(),
                        x.attempts.to_string(),
                        x.ideal.to_string(),
                        x.actual.to_string(),
                        x.overshoot.to_string(),
                        x.aggregated.to_string(),
                    ])
                    .map_err(output_err)?;
                }
                w.flush().map_err(output_err)?;
            }
            let ce = checkpoint_efficiency(&recs, sc.burn_in);
            let tail = &recs[sc.burn_in.min(recs.len())..];
            let attempts = mean_se(&tail.iter().map(|x| x.attempts as f64).collect::<Vec<_>>());
            let hops = mean_se(&tail.iter().map(|x| (x.end_index - x.start_index) as f64).collect::<Vec<_>>());
            let tail_pairs: Vec<(f64, f64)> = tail.iter().map(|x| (x.ideal, x.actual)).collect();
            let eff_se = ratio_se(&tail_pairs);
            let pairs: Vec<(f64, f64)> = recs.iter().map(|x| (x.ideal, x.actual)).collect();
            Ok(RepOutput {
                json: json!({
                    "replication": r,
                    "regime": window.regime(),
                    "efficiency": estimate_json(&ce.estimate),
                    "burn_in": ce.burn_in,
                    "burn_in_ratio": num(ce.burn_in_ratio),
                    "burn_in_ratio_se": num(eff_se),
                    "mean_ideal": num(ce.ideal_after_burn_in.mean),
                    "mean_actual": num(ce.actual_after_burn_in.mean),
                    "mean_attempts": num(attempts.mean),
                    "mean_attempts_se": num(attempts.se),
                    "mean_hop_points": num(hops.mean),
                    "aggregated_iterations": recs.iter().filter(|x| x.aggregated).count(),
                }),
                stats: RepStats {
                    regime: window.regime(),
                    efficiency: ce.burn_in_ratio,
                    efficiency_se: eff_se,
                    trend: Some(ce.estimate.trend),
                    mean_actual: ce.actual_after_burn_in.mean,
                    mean_actual_se: ce.actual_after_burn_in.se,
                    mean_attempts: attempts.mean,
                    mean_attempts_se: attempts.se,
                    ..Default::default()
                },
                curve: efficiency_curve(&pairs, &grid),
            })
        }
        ModelKind::Universal => {
            let (d, l) = sc.process.renewal_laws(window.regime()).expect("validated");
            let lambda = l.exponential_rate().expect("validated");
            let b = sc.lookback.unwrap_or_else(|| default_lookback(d, lambda));
            let map = compute_trajectory_map(&mut window, n, &sc.checkpoint).map_err(|e| pathology(e.to_string()))?;
            let np = compute_n_process(&map, b).map_err(|e| pathology(e.to_string()))?;
            if let Some(mut w) = trace_writer(trace_dir, r)? {
                w.write_record(["n", "kappa", "n_count"]).map_err(output_err)?;
                for (i, k) in map.kappa.iter().enumerate() {
                    w.write_record([i.to_string(), k.to_string(), opt(np.get(i))]).map_err(output_err)?;
                }
                w.flush().map_err(output_err)?;
            }
            let zeros: Vec<f64> = np.values.iter().map(|&v| (v == 0) as u8 as f64).collect();
            let zero = mean_se(&zeros);
            let zero_se = batch_means_se(&zeros, 20);
            let mean_n = np.values.iter().map(|&v| v as f64).sum::<f64>() / np.values.len() as f64;
            let verified = np.universal_indices.iter().filter(|&&i| verify_universal(&map, i, b)).count();
            let rows = kernel_report(&np, d, lambda, sc.kernel_rows, 0.99, KernelForm::Factorized);
            let shared = kernel_report(&np, d, lambda, sc.kernel_rows, 0.99, KernelForm::SharedInterval);
            let stationary_zero = kernel_stationary(d, lambda, KERNEL_STATES, KernelForm::Factorized)[0];
            let shared_zero = kernel_stationary(d, lambda, KERNEL_STATES, KernelForm::SharedInterval)[0];
            // cumulative count of universal checkpoints against window length
            let mut curve = Vec::with_capacity(grid.len());
            let mut k = 0;
            for &g in &grid {
                while k < np.universal_indices.len() && np.universal_indices[k] <= g {
                    k += 1;
                }
                curve.push((g, k as f64));
            }
            Ok(RepOutput {
                json: json!({
                    "replication": r,
                    "regime": window.regime(),
                    "lookback": b,
                    "universal_count": np.universal_indices.len(),
                    "universal_density": num(zero.mean),
                    "universal_density_se": num(zero_se),
                    "stationary_zero_mass": num(stationary_zero),
                    "shared_interval_zero_mass": num(shared_zero),
                    "mean_n": num(mean_n),
                    "verified": verified,
                    "all_verified": verified == np.universal_indices.len(),
                    "max_hop": np.max_hop,
                    "boundary_ok": np.boundary_ok,
                    "kernel_rows": serde_json::to_value(&rows).map_err(output_err)?,
                    "shared_interval_rows": serde_json::to_value(&shared).map_err(output_err)?,
                }),
                stats: RepStats {
                    regime: window.regime(),
                    zero_fraction: zero.mean,
                    zero_fraction_se: zero_se,
                    kernel_inside: rows.iter().map(|x| (x.k, x.inside)).collect(),
                    shared_inside: shared.iter().map(|x| (x.k, x.inside)).collect(),
                    ..Default::default()
                },
                curve,
            })
        }
        ModelKind::Rwalk => {
            let (d, l) = sc.process.renewal_laws(window.regime()).expect("validated");
            let (d, l) = (d.clone(), l.clone());
            let trace = simulate_walk_restart(&mut window, sc.p, n, &sc.restart).map_err(|e| pathology(e.to_string()))?;
            if let Some(mut w) = trace_writer(trace_dir, r)? {
                w.write_record(["step", "position", "task_index", "visit_time"]).map_err(output_err)?;
                for v in &trace.visits {
                    w.write_record([
                        v.visit.to_string(),
                        trace.positions[v.visit].to_string(),
                        v.task.to_string(),
                        v.record.actual.to_string(),
                    ])
                    .map_err(output_err)?;
                }
                w.flush().map_err(output_err)?;
            }
            let we = walk_efficiency(&trace, &d, &l).map_err(|e| pathology(e.to_string()))?;
            let consts = estimate_walk_constants(sc.p, sc.walks, key.child(1));
            let mut base_window = sc.process.window(key);
            let base = run_restart(&mut base_window, n, &sc.restart).map_err(|e| pathology(e.to_string()))?;
            let base_e = EfficiencyEstimate::from_pairs(base.iter().map(|x| (x.ideal, x.actual)), DEFAULT_TOLERANCE).ratio;
            let bound = consts.gamma / consts.rho * base_e;
            let lag1_se = 1.0 / (we.n_blocks as f64).sqrt();
            let block_pairs: Vec<(f64, f64)> = {
                let regen = crate::rwalk::find_regenerations(&trace);
                crate::rwalk::regeneration_blocks(&trace, &regen).iter().map(|b| (b.ideal, b.time)).collect()
            };
            Ok(RepOutput {
                json: json!({
                    "replication": r,
                    "regime": window.regime(),
                    "p": sc.p,
                    "visits": trace.visits.len(),
                    "direct": estimate_json(&we.direct),
                    "direct_se": num(we.direct_se),
                    "formula": num(we.formula),
                    "agree_2pct": ((we.direct.ratio - we.formula).abs() <= 0.02 * we.formula),
                    "mean_size": num(we.mean_size),
                    "mean_visit_time": num(we.mean_visit_time),
                    "block_visits": {"mean": num(we.block_visits.mean), "se": num(we.block_visits.se)},
                    "block_levels": {"mean": num(we.block_levels.mean), "se": num(we.block_levels.se)},
                    "block_time": {"mean": num(we.block_time.mean), "se": num(we.block_time.se)},
                    "wald_residual": {"mean": num(we.wald_residual.mean), "se": num(we.wald_residual.se)},
                    "wald_within_3se": we.wald_residual.mean.abs() <= 3.0 * we.wald_residual.se,
                    "block_time_lag1": num(we.block_time_lag1),
                    "lag1_within_4se": we.block_time_lag1.abs() <= 4.0 * lag1_se,
                    "n_blocks": we.n_blocks,
                    "gamma_hat": num(consts.gamma),
                    "rho_hat": num(consts.rho),
                    "baseline_efficiency": num(base_e),
                    "bound": num(bound),
                    "bound_holds": we.direct.ratio >= bound - 3.0 * we.direct_se,
                }),
                stats: RepStats {
                    regime: window.regime(),
                    efficiency: we.direct.ratio,
                    efficiency_se: we.direct_se,
                    trend: Some(we.direct.trend),
                    mean_actual: we.formula,
                    ..Default::default()
                },
                curve: efficiency_curve(&block_pairs, &curve_grid(block_pairs.len(), sc.output.curve_points)),
            })
        }
        ModelKind::Analytic => Ok(RepOutput {
            json: json!({"replication": r}),
            stats: RepStats::default(),
            curve: Vec::new(),
        }),
    }
}

fn run_all(sc: &Scenario, trace_dir: Option<&Path>) -> Result<Vec<RepOutput>, RunError> {
    if sc.model == ModelKind::Analytic {
        return Ok(Vec::new());
    }
    (0..sc.replications).into_par_iter().map(|r| run_replication(sc, r, trace_dir)).collect()
}

/// Mean over replications with its standard error; a single replication
/// falls back to its within-run standard error.
fn combine(values: &[(f64, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = values.iter().map(|v| v.0).collect();
    let m = mean_se(&xs);
    if values.len() == 1 {
        (values[0].0, values[0].1)
    } else {
        (m.mean, m.se)
    }
}

fn est(values: &[(f64, f64)]) -> Value {
    let (m, s) = combine(values);
    json!({"mean": num(m), "se": num(s)})
}

fn analytic_json(sc: &Scenario) -> Value {
    match &sc.process {
        ProcessSpec::Renewal { sizes, marks } => {
            let tr = expected_restart_time(sizes, marks);
            let tc = expected_checkpoint_time(sizes, marks);
            let e = tr.as_ref().ok().map(|t| if t.is_finite() { sizes.mean() / t.value } else { 0.0 });
            json!({
                "expected_restart_time": tr.as_ref().map(expected_json).unwrap_or_else(|e| json!({"error": e.to_string()})),
                "expected_checkpoint_time": tc.as_ref().map(expected_json).unwrap_or_else(|e| json!({"error": e.to_string()})),
                "restart_efficiency": e.map(num),
            })
        }
        ProcessSpec::Markov(spec) => match mrp_efficiency(spec) {
            Ok(m) => json!({
                "numerator": expected_json(&m.numerator),
                "denominator": expected_json(&m.denominator),
                "restart_efficiency": num(m.efficiency),
                "slow_pairs": m.slow_pairs,
            }),
            Err(e) => json!({"error": e.to_string()}),
        },
        ProcessSpec::Mixture {
            sizes, marks0, marks1, ..
        } => {
            let regime = |l: &Distribution| {
                let t = expected_restart_time(sizes, l);
                json!({
                    "expected_restart_time": t.as_ref().map(expected_json).unwrap_or(Value::Null),
                    "restart_efficiency": t.ok().map(|t| num(if t.is_finite() { sizes.mean() / t.value } else { 0.0 })),
                })
            };
            json!({"regime0": regime(marks0), "regime1": regime(marks1)})
        }
    }
}

fn build_summary(sc: &Scenario, reps: &[RepOutput]) -> Value {
    let mut estimates = Map::new();
    let mut diagnostics = Map::new();
    let s: Vec<&RepStats> = reps.iter().map(|r| &r.stats).collect();
    let pick = |f: &dyn Fn(&RepStats) -> (f64, f64)| s.iter().map(|x| f(x)).collect::<Vec<_>>();
    match sc.model {
        ModelKind::Restart | ModelKind::Checkpoint | ModelKind::Rwalk => {
            estimates.insert("efficiency".into(), est(&pick(&|x| (x.efficiency, x.efficiency_se))));
            let name = if sc.model == ModelKind::Rwalk { "formula_efficiency" } else { "mean_actual" };
            estimates.insert(name.into(), est(&pick(&|x| (x.mean_actual, x.mean_actual_se))));
            if sc.model == ModelKind::Checkpoint {
                estimates.insert("mean_attempts".into(), est(&pick(&|x| (x.mean_attempts, x.mean_attempts_se))));
            }
            let mut trends = Map::new();
            for t in [Trend::Stable, Trend::Decreasing, Trend::Increasing] {
                trends.insert(trend_name(t).into(), json!(s.iter().filter(|x| x.trend == Some(t)).count()));
            }
            diagnostics.insert("trend_counts".into(), Value::Object(trends));
            if matches!(sc.process, ProcessSpec::Mixture { .. }) {
                for regime in [0u8, 1] {
                    let sub: Vec<(f64, f64)> = s
                        .iter()
                        .filter(|x| x.regime == Some(regime))
                        .map(|x| (x.efficiency, x.efficiency_se))
                        .collect();
                    diagnostics.insert(format!("regime{regime}_replications"), json!(sub.len()));
                    if !sub.is_empty() {
                        estimates.insert(format!("efficiency_regime{regime}"), est(&sub));
                    }
                }
            }
        }
        ModelKind::Universal => {
            estimates.insert("universal_density".into(), est(&pick(&|x| (x.zero_fraction, x.zero_fraction_se))));
            let inside = s.iter().all(|x| x.kernel_inside.iter().all(|k| k.1));
            diagnostics.insert("kernel_rows_inside".into(), json!(inside));
            let inside = s.iter().all(|x| x.shared_inside.iter().all(|k| k.1));
            diagnostics.insert("shared_interval_rows_inside".into(), json!(inside));
        }
        ModelKind::Analytic => {}
    }
    diagnostics.insert("analytic".into(), analytic_json(sc));
    json!({
        "schema_version": SCHEMA_VERSION,
        "model": sc.model.name(),
        "scenario_hash": sc.hash,
        "seed": sc.seed,
        "n_iterations": sc.iterations,
        "replications": if sc.model == ModelKind::Analytic { 0 } else { sc.replications },
        "estimates": Value::Object(estimates),
        "diagnostics": Value::Object(diagnostics),
        "per_replication": reps.iter().map(|r| r.json.clone()).collect::<Vec<_>>(),
    })
}

/// Serialized summary: pretty JSON with a trailing newline.
pub fn render_summary(summary: &Value) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("json values serialize");
    s.push('\n');
    s
}

/// Runs every replication and writes `summary.json`, `efficiency_curve.csv`
/// and, if enabled, one `trace_r{r}.csv` per replication to `out_dir`.
pub fn run_scenario(sc: &Scenario, out_dir: &Path) -> Result<Value, RunError> {
    fs::create_dir_all(out_dir).map_err(output_err)?;
    let trace_dir = sc.output.traces.then_some(out_dir);
    let reps = run_all(sc, trace_dir)?;
    let summary = build_summary(sc, &reps);
    fs::write(out_dir.join("summary.json"), render_summary(&summary)).map_err(output_err)?;
    if !reps.is_empty() {
        let column = if sc.model == ModelKind::Universal { "universal_count" } else { "efficiency" };
        let mut w = csv::Writer::from_path(out_dir.join("efficiency_curve.csv")).map_err(output_err)?;
        w.write_record(["replication", "n", column]).map_err(output_err)?;
        for (r, rep) in reps.iter().enumerate() {
            for (n, e) in &rep.curve {
                w.write_record([r.to_string(), n.to_string(), e.to_string()]).map_err(output_err)?;
            }
        }
        w.flush().map_err(output_err)?;
    }
    Ok(summary)
}

/// Runs the scenario without writing any files and returns the summary.
pub fn simulate(sc: &Scenario) -> Result<Value, RunError> {
    let reps = run_all(sc, None)?;
    Ok(build_summary(sc, &reps))
}

// ---------------------------------------------------------------------------
// comparison

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub quantity: String,
    pub analytic: Option<f64>,
    pub classification: Option<Classification>,
    pub simulated: Option<f64>,
    pub se: Option<f64>,
    /// `agree`, `disagree`, `growing`, `not growing`, `decreasing`,
    /// `not decreasing` or `n/a`.
    pub flag: String,
}

/// Within 3 SE, or within 1% where heavy per-task times make the sample SE
/// too small to trust.
fn agreement(analytic: f64, sim: f64, se: f64) -> String {
    if !se.is_finite() {
        return "n/a".into();
    }
    let diff = (analytic - sim).abs();
    if diff <= 3.0 * se || diff <= 0.01 * analytic.abs() {
        "agree".into()
    } else {
        "disagree".into()
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn mean_time_row(t: &ExpectedTime, stats: &[&RepStats], label: &str) -> CompareRow {
    let (m, se) = combine(&stats.iter().map(|x| (x.mean_actual, x.mean_actual_se)).collect::<Vec<_>>());
    let flag = if t.is_finite() {
        agreement(t.value, m, se)
    } else {
        // averaged over replications, the running mean must rise across decades
        let k = stats.first().map(|x| x.decade_means.len()).unwrap_or(0);
        let avg: Vec<f64> = (0..k)
            .map(|i| stats.iter().map(|x| x.decade_means[i].1).sum::<f64>() / stats.len() as f64)
            .collect();
        if avg.len() >= 2 && avg.windows(2).all(|w| w[1] > w[0]) {
            "growing".into()
        } else {
            "not growing".into()
        }
    };
    CompareRow {
        quantity: label.into(),
        analytic: Some(t.value),
        classification: Some(t.classification),
        simulated: finite(m),
        se: finite(se),
        flag,
    }
}

fn efficiency_row(label: &str, analytic: f64, stats: &[&RepStats]) -> CompareRow {
    let (m, se) = combine(&stats.iter().map(|x| (x.efficiency, x.efficiency_se)).collect::<Vec<_>>());
    let flag = if analytic == 0.0 {
        if stats.iter().all(|x| x.trend == Some(Trend::Decreasing)) {
            "decreasing".into()
        } else {
            "not decreasing".into()
        }
    } else {
        agreement(analytic, m, se)
    };
    CompareRow {
        quantity: label.into(),
        analytic: Some(analytic),
        classification: None,
        simulated: finite(m),
        se: finite(se),
        flag,
    }
}

fn no_counterpart(field: &str, message: &str) -> RunError {
    RunError::Scenario(ScenarioError::Invalid(vec![FieldError {
        field: field.into(),
        line: None,
        message: message.into(),
    }]))
}

fn efficiency_of(d: &Distribution, t: &ExpectedTime) -> f64 {
    if t.is_finite() {
        d.mean() / t.value
    } else {
        0.0
    }
}

/// Side-by-side analytic and simulated values, flagged at 3 standard errors.
pub fn compare_report(sc: &Scenario) -> Result<Vec<CompareRow>, RunError> {
    let dist_err = |e: crate::dist::DistError| no_counterpart("process.sizes", &e.to_string());
    let reps = run_all(sc, None)?;
    let stats: Vec<&RepStats> = reps.iter().map(|r| &r.stats).collect();
    let mut rows = Vec::new();
    match (sc.model, &sc.process) {
        (ModelKind::Restart, ProcessSpec::Renewal { sizes, marks }) => {
            let t = expected_restart_time(sizes, marks).map_err(dist_err)?;
            rows.push(mean_time_row(&t, &stats, "E[T^R]"));
            rows.push(efficiency_row("e", efficiency_of(sizes, &t), &stats));
        }
        (ModelKind::Restart, ProcessSpec::Markov(spec)) => {
            let m = mrp_efficiency(spec).map_err(dist_err)?;
            rows.push(mean_time_row(&m.denominator, &stats, "E[T^R] (stationary)"));
            rows.push(efficiency_row("e", m.efficiency, &stats));
        }
        (
            ModelKind::Restart,
            ProcessSpec::Mixture {
                sizes, marks0, marks1, ..
            },
        ) => {
            for (regime, l) in [(0u8, marks0), (1, marks1)] {
                let sub: Vec<&RepStats> = stats.iter().copied().filter(|x| x.regime == Some(regime)).collect();
                if sub.is_empty() {
                    continue;
                }
                let t = expected_restart_time(sizes, l).map_err(dist_err)?;
                rows.push(mean_time_row(&t, &sub, &format!("E[T^R] | regime {regime}")));
                rows.push(efficiency_row(&format!("e | regime {regime}"), efficiency_of(sizes, &t), &sub));
            }
        }
        (ModelKind::Checkpoint, ProcessSpec::Renewal { sizes, marks }) => {
            let (Some(mu), Some(lambda)) = (sizes.exponential_rate(), marks.exponential_rate()) else {
                return Err(no_counterpart("model.kind", "checkpoint comparison needs exponential sizes and marks"));
            };
            let e = (1.0 - lambda / mu).max(0.0);
            rows.push(efficiency_row("e (after burn-in)", e, &stats));
            let tau = if lambda < mu { (lambda + mu) / (mu - lambda) } else { f64::INFINITY };
            let (m, se) = combine(&stats.iter().map(|x| (x.mean_attempts, x.mean_attempts_se)).collect::<Vec<_>>());
            rows.push(CompareRow {
                quantity: "E[attempts per hop]".into(),
                analytic: Some(tau),
                classification: None,
                simulated: finite(m),
                se: finite(se),
                flag: if tau.is_finite() { agreement(tau, m, se) } else { "n/a".into() },
            });
        }
        (ModelKind::Universal, _) => {
            let (d, l) = sc.process.renewal_laws(stats.first().and_then(|x| x.regime)).expect("validated");
            let lambda = l.exponential_rate().expect("validated");
            let (m, se) = combine(&stats.iter().map(|x| (x.zero_fraction, x.zero_fraction_se)).collect::<Vec<_>>());
            for (form, label) in [(KernelForm::Factorized, "factorized"), (KernelForm::SharedInterval, "shared interval")] {
                let pi0 = kernel_stationary(d, lambda, KERNEL_STATES, form)[0];
                rows.push(CompareRow {
                    quantity: format!("P[N = 0] ({label})"),
                    analytic: Some(pi0),
                    classification: None,
                    simulated: finite(m),
                    se: finite(se),
                    flag: agreement(pi0, m, se),
                });
                for k in 0..=sc.kernel_rows {
                    let inside = stats.iter().all(|x| {
                        let v = if form == KernelForm::Factorized { &x.kernel_inside } else { &x.shared_inside };
                        v.iter().any(|&(kk, ok)| kk == k && ok)
                    });
                    rows.push(CompareRow {
                        quantity: format!("kernel row {k} ({label})"),
                        analytic: None,
                        classification: None,
                        simulated: None,
                        se: None,
                        flag: if inside { "agree".into() } else { "disagree".into() },
                    });
                }
            }
        }
        (ModelKind::Rwalk, _) => {
            let (d, l) = sc.process.renewal_laws(stats.first().and_then(|x| x.regime)).expect("validated");
            let t = expected_restart_time(d, l).map_err(dist_err)?;
            let e = (1.0 - 2.0 * sc.p) * efficiency_of(d, &t);
            rows.push(efficiency_row("e_p", e, &stats));
        }
        (ModelKind::Analytic, ProcessSpec::Renewal { sizes, marks }) => {
            for (label, t) in [
                ("E[T^R]", expected_restart_time(sizes, marks).map_err(dist_err)?),
                ("E[T^C]", expected_checkpoint_time(sizes, marks).map_err(dist_err)?),
            ] {
                rows.push(CompareRow {
                    quantity: label.into(),
                    analytic: Some(t.value),
                    classification: Some(t.classification),
                    simulated: None,
                    se: None,
                    flag: "n/a".into(),
                });
            }
        }
        (ModelKind::Analytic, ProcessSpec::Markov(spec)) => {
            let m = mrp_efficiency(spec).map_err(dist_err)?;
            rows.push(CompareRow {
                quantity: "e".into(),
                analytic: Some(m.efficiency),
                classification: Some(m.denominator.classification),
                simulated: None,
                se: None,
                flag: "n/a".into(),
            });
        }
        _ => return Err(no_counterpart("model.kind", "no analytic counterpart for this model and process")),
    }
    Ok(rows)
}

fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{v:.6}"),
        None => "-".into(),
    }
}

/// Plain-text table of a comparison.
pub fn render_compare(rows: &[CompareRow]) -> String {
    let mut out = Vec::new();
    let header = ["quantity", "analytic", "class", "simulated", "se", "flag"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.quantity.clone(),
                cell(r.analytic),
                r.classification.map(|c| format!("{c:?}")).unwrap_or_else(|| "-".into()),
                cell(r.simulated),
                cell(r.se),
                r.flag.clone(),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    writeln!(out, "{}", line(&header.map(String::from))).unwrap();
    for row in &body {
        writeln!(out, "{}", line(row)).unwrap();
    }
    String::from_utf8(out).expect("ascii table")
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
kind = "restart"

[process]
kind = "renewal"
sizes = "exp(2)"

[marks]
law = "exp(1)"

[run]
iterations = 2000
replications = 2
seed = 3
"#;

    #[test]
    fn overrides_and_hash() {
        let a = load_scenario(BASE, &[]).unwrap();
        assert_eq!(a.iterations, 2000);
        let b = load_scenario(BASE, &[parse_override("N=1000").unwrap()]).unwrap();
        assert_eq!(b.iterations, 1000);
        assert_ne!(a.hash, b.hash);
        let c = load_scenario(&format!("# comment\n{BASE}"), &[]).unwrap();
        assert_eq!(a.hash, c.hash);
        assert_eq!(parse_override("B=7").unwrap().0, "model.lookback");
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn field_addressed_errors() {
        let bad = BASE.replace("law = \"exp(1)\"", "law = \"exp(-1)\"");
        match load_scenario(&bad, &[]) {
            Err(ScenarioError::Invalid(errs)) => {
                assert_eq!(errs[0].field, "marks.law");
                assert_eq!(errs[0].line, Some(10));
            }
            other => panic!("{other:?}"),
        }
        let uni = BASE.replace("\"restart\"", "\"universal\"").replace("exp(1)", "pareto(1,2)");
        match load_scenario(&uni, &[]) {
            Err(ScenarioError::Invalid(errs)) => assert!(errs.iter().any(|e| e.field == "marks.law")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_scenario("[model", &[]), Err(ScenarioError::Syntax(_))));
    }

    #[test]
    fn summary_is_deterministic() {
        let sc = load_scenario(BASE, &[]).unwrap();
        let a = render_summary(&simulate(&sc).unwrap());
        let b = render_summary(&simulate(&sc).unwrap());
        assert_eq!(a, b);
        assert!(a.contains("\"n_iterations\": 2000"));
    }

    #[test]
    fn grid_ends_at_n() {
        let g = curve_grid(1_000_000, 40);
        assert_eq!(g[0], 10);
        assert_eq!(*g.last().unwrap(), 1_000_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(decades(1_000_000), vec![1000, 10_000, 100_000, 1_000_000]);
    }
}
