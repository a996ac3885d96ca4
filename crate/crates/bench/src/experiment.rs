//! Experiment configuration, orchestration and output files.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use contracting::methods::{frank_wolfe_run, CapPolicy, InexactnessMode, RunFailure, RunOutcome};
use contracting::newton::{icn_run, IcnOptions, InnerCap};
use contracting::{RunTrace, TraceRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::generate_instance;
use crate::BenchError;

/// Window of `k` used for the reported log-log slope of `ℓ_k`.
pub const SLOPE_WINDOW: (usize, usize) = (20, 200);

/// Accuracies at which the summary records the oracle calls spent.
pub const MILESTONES: [f64; 3] = [1e-2, 1e-4, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Fw,
    Icn,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Fw => "fw",
            MethodKind::Icn => "icn",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

fn default_methods() -> Vec<MethodKind> {
    vec![MethodKind::Fw, MethodKind::Icn]
}
fn default_c() -> f64 {
    1.0
}
fn default_max_outer() -> usize {
    500
}
fn default_true() -> bool {
    true
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_exit() -> InexactnessMode {
    InexactnessMode::Stationarity
}

/// One experiment: a seeded SoftMax instance and the methods to run on it.
///
/// `mu` has no default. Typical sweeps use `{0.05, 0.1, 0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub mu: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodKind>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    /// Fixed inner iteration cap for ICN; automatic when absent.
    #[serde(default)]
    pub inner_cap: Option<usize>,
    #[serde(default = "default_true")]
    pub certificate: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    /// Inner exit test of ICN.
    #[serde(default = "default_exit")]
    pub inexactness: InexactnessMode,
    /// When false the `wall_ms` column is left empty so repeated runs are
    /// byte-identical.
    #[serde(default = "default_true")]
    pub wall_time: bool,
}

impl ExperimentConfig {
    pub fn new(n: usize, m: usize, mu: f64, seed: u64) -> Self {
        Self {
            n,
            m,
            mu,
            seed,
            methods: default_methods(),
            c: default_c(),
            max_outer: default_max_outer(),
            inner_cap: None,
            certificate: true,
            out: default_out(),
            format: OutputFormat::default(),
            inexactness: default_exit(),
            wall_time: true,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.n == 0 || self.m == 0 {
            return bad(format!("n and m must be at least 1, got n={}, m={}", self.n, self.m));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let mut seen = Vec::new();
        for &m in &self.methods {
            if seen.contains(&m) {
                return bad(format!("method {m} listed twice"));
            }
            seen.push(m);
        }
        if self.methods.contains(&MethodKind::Icn) && !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive for icn, got {}", self.c));
        }
        if self.inner_cap == Some(0) {
            return bad("inner_cap must be at least 1".into());
        }
        Ok(())
    }

    fn icn_options(&self) -> IcnOptions {
        let mut opts = IcnOptions::new(self.c, self.max_outer, self.certificate);
        opts.mode = self.inexactness;
        opts.cap = match self.inner_cap {
            Some(n) => InnerCap::Fixed(n),
            None => InnerCap::Auto { variation: None },
        };
        opts.on_cap = CapPolicy::KeepCurrent;
        opts
    }
}

/// One CSV row. `None` becomes an empty field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub k: usize,
    #[serde(rename = "F")]
    pub objective: f64,
    pub ell_k: Option<f64>,
    pub lower_bound: Option<f64>,
    pub grad_calls: u64,
    pub hess_calls: u64,
    pub lmo_calls: u64,
    pub inner_iters: usize,
    pub wall_ms: Option<f64>,
}

impl Row {
    fn from_record(r: &TraceRecord, wall_time: bool) -> Self {
        Row {
            k: r.k,
            objective: r.objective,
            ell_k: r.ell,
            lower_bound: r.lower_bound,
            grad_calls: r.grad_calls,
            hess_calls: r.hess_calls,
            lmo_calls: r.lmo_calls,
            inner_iters: r.inner_iters,
            wall_ms: wall_time.then_some(r.wall_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub eps: f64,
    pub k: usize,
    pub grad_calls: u64,
    pub hess_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: MethodKind,
    pub iterations: usize,
    pub final_objective: f64,
    /// Last certificate `ℓ_k`, an upper bound on `F(x_k) − F*`.
    pub residual_estimate: Option<f64>,
    pub best_lower_bound: Option<f64>,
    /// Least-squares slope of `log ℓ_k` against `log k` over [`SLOPE_WINDOW`].
    pub slope: Option<f64>,
    pub milestones: Vec<Milestone>,
    pub grad_calls: u64,
    pub hess_calls: u64,
    pub lmo_calls: u64,
    pub inner_cap_hits: usize,
}

impl MethodSummary {
    pub fn from_trace(method: MethodKind, trace: &RunTrace) -> Self {
        let last = trace.last().expect("traces start with the k = 0 record");
        let milestones = MILESTONES
            .iter()
            .filter_map(|&eps| {
                trace.first_certified(eps).map(|r| Milestone { eps, k: r.k, grad_calls: r.grad_calls, hess_calls: r.hess_calls })
            })
            .collect();
        MethodSummary {
            method,
            iterations: last.k,
            final_objective: last.objective,
            residual_estimate: last.ell,
            best_lower_bound: trace.best_lower_bound(),
            slope: trace.certificate_slope(SLOPE_WINDOW.0, SLOPE_WINDOW.1),
            milestones,
            grad_calls: last.grad_calls,
            hess_calls: last.hess_calls,
            lmo_calls: last.lmo_calls,
            inner_cap_hits: trace.records.iter().filter(|r| r.inner_cap_hit).count(),
        }
    }

    /// Every outer iteration exhausted the inner cap.
    pub fn all_capped(&self) -> bool {
        self.iterations > 0 && self.inner_cap_hits == self.iterations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub runs: Vec<MethodSummary>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub traces: Vec<(MethodKind, RunTrace)>,
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn trace(&self, method: MethodKind) -> Option<&RunTrace> {
        self.traces.iter().find(|(m, _)| *m == method).map(|(_, t)| t)
    }

    /// ICN ran and every one of its outer iterations hit the inner cap.
    pub fn icn_exhausted(&self) -> bool {
        self.summary.runs.iter().any(|s| s.method == MethodKind::Icn && s.all_capped())
    }
}

fn unwrap_run(method: MethodKind, res: Result<RunOutcome, RunFailure>) -> Result<RunTrace, BenchError> {
    res.map(|o| o.trace).map_err(|f| BenchError::Run { method, k: f.state.k + 1, source: f.source })
}

/// Runs the configured methods without touching the filesystem.
pub fn run_methods(config: &ExperimentConfig) -> Result<Vec<(MethodKind, RunTrace)>, BenchError> {
    config.validate()?;
    let instance = generate_instance(config.n, config.m, config.mu, config.seed)?;
    let problem = instance.problem();
    config
        .methods
        .iter()
        .map(|&method| {
            let res = match method {
                MethodKind::Fw => frank_wolfe_run(&problem, config.max_outer, config.certificate),
                MethodKind::Icn => icn_run(&problem, &config.icn_options()),
            };
            unwrap_run(method, res).map(|t| (method, t))
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

fn write_trace(path: &Path, trace: &RunTrace, format: OutputFormat, wall_time: bool) -> Result<(), BenchError> {
    let rows: Vec<Row> = trace.records.iter().map(|r| Row::from_record(r, wall_time)).collect();
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush().map_err(io_err(path))?;
        }
        OutputFormat::Json => write_json(path, &rows)?,
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::File::create(path).and_then(|mut f| f.write_all(text.as_bytes())).map_err(io_err(path))
}

/// Runs the experiment and writes `<method>.<csv|json>` plus `summary.json`
/// into `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, BenchError> {
    let traces = run_methods(config)?;
    fs::create_dir_all(&config.out).map_err(io_err(&config.out))?;
    let mut files = Vec::new();
    for (method, trace) in &traces {
        let path = config.out.join(format!("{}.{}", method.name(), config.format.extension()));
        write_trace(&path, trace, config.format, config.wall_time)?;
        files.push(path);
    }
    let summary = Summary {
        config: config.clone(),
        runs: traces.iter().map(|(m, t)| MethodSummary::from_trace(*m, t)).collect(),
    };
    let path = config.out.join("summary.json");
    write_json(&path, &summary)?;
    files.push(path);
    Ok(ExperimentReport { summary, traces, files })
}

/// Runs independent experiments in parallel. Output directories must be
/// distinct.
pub fn run_sweep(configs: &[ExperimentConfig]) -> Result<Vec<Result<ExperimentReport, BenchError>>, BenchError> {
    for (i, c) in configs.iter().enumerate() {
        c.validate().map_err(|e| BenchError::Config(format!("entry {i}: {e}")))?;
        if configs[..i].iter().any(|o| o.out == c.out) {
            return Err(BenchError::Config(format!("entry {i}: output directory {} is used twice", c.out.display())));
        }
    }
    Ok(configs.par_iter().map(run_experiment).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ok = ExperimentConfig::new(3, 4, 0.1, 0);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.mu = 0.0;
        assert!(matches!(c.validate(), Err(BenchError::Config(_))));
        let mut c = ok.clone();
        c.n = 0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.c = -1.0;
        assert!(c.validate().is_err());
        c.methods = vec![MethodKind::Fw];
        assert!(c.validate().is_ok(), "c only matters when icn runs");
        let mut c = ok.clone();
        c.methods = vec![MethodKind::Fw, MethodKind::Fw];
        assert!(c.validate().is_err());
        let mut c = ok;
        c.methods.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults_and_unknown_fields() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"n": 5, "m": 7, "mu": 0.3}"#).unwrap();
        assert_eq!(c, ExperimentConfig::new(5, 7, 0.3, 0));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"n": 5, "m": 7, "mu": 0.3, "sigma": 1}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"n": 5, "m": 7}"#).is_err(), "mu is required");
    }

    #[test]
    fn summary_counts_cap_hits() {
        let mut c = ExperimentConfig::new(6, 10, 0.1, 3);
        c.methods = vec![MethodKind::Icn];
        c.max_outer = 5;
        c.inner_cap = Some(1);
        c.c = 1e-9;
        let traces = run_methods(&c).unwrap();
        let s = MethodSummary::from_trace(MethodKind::Icn, &traces[0].1);
        assert_eq!(s.inner_cap_hits, 5);
        assert!(s.all_capped());
    }
}
