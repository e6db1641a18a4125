//! Run configuration, orchestration and output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::estimation::DEFAULT_EPS_RANK;
use crate::flow::{
    classify_intervals, flow_records, FlowError, FlowRecord, FlowStats, IntervalReport,
    INTERVAL_THRESHOLD,
};
use crate::model::{builtin_model, theta_derivative_check, ModelError, ModelSpec, ThetaDerivativeCheck};
use crate::operators::ToleranceConfig;
use crate::propagation::{max_fd_deviation, propagate, PropagationError};

pub const DEFAULT_DELTA_THETA: f64 = 1e-4;
/// Relative tolerance on the oracle comparisons, scaled by `max(1, max_t F)`.
pub const ORACLE_REL_TOL: f64 = 1e-5;
/// Per-point tolerance `1e-6·max(1, |F|)` on terms that must vanish.
pub const FLOW_REL_TOL: f64 = 1e-6;
pub const THETA_CONSISTENCY_TOL: f64 = 1e-5;
pub const MIN_OVERLAP: f64 = 0.99;
/// Central differences of `H`, `γ`, `A` in θ below this count as zero.
pub const INGREDIENT_ZERO_TOL: f64 = 1e-10;
const INGREDIENT_SAMPLES: usize = 17;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinRef {
    pub builtin: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Builtin(BuiltinRef),
    Spec(ModelSpec),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputTarget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json_summary_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// `flow_fd` against the full flow, plus vanishing of the Hamiltonian and
    /// remainder terms when condition (ii) holds.
    #[serde(default = "yes")]
    pub oracle: bool,
    #[serde(default = "yes")]
    pub theta_consistency: bool,
    #[serde(default = "yes")]
    pub intervals: bool,
    /// `flow_fd` against the channel sum alone; fails exactly when the model
    /// carries θ-dependent `H`, `γ` or `A`.
    #[serde(default)]
    pub decomposition: bool,
}

fn yes() -> bool {
    true
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            oracle: true,
            theta_consistency: true,
            intervals: true,
            decomposition: false,
        }
    }
}

impl Checks {
    pub fn none() -> Self {
        Self {
            oracle: false,
            theta_consistency: false,
            intervals: false,
            decomposition: false,
        }
    }

    /// Parses a comma-separated list such as `oracle,theta,intervals`.
    pub fn from_list(list: &str) -> Result<Self, ConfigError> {
        let mut c = Self::none();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "oracle" => c.oracle = true,
                "theta" | "theta_consistency" => c.theta_consistency = true,
                "intervals" => c.intervals = true,
                "decomposition" => c.decomposition = true,
                "none" => {}
                other => {
                    return Err(ConfigError::Invariant(format!("unknown check '{other}'")));
                }
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Value,
    theta: f64,
    t_end: f64,
    dt: f64,
    #[serde(default = "default_delta")]
    delta_theta: f64,
    #[serde(default)]
    outputs: Vec<OutputTarget>,
    #[serde(default)]
    checks: Checks,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA_THETA
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: ModelSource,
    pub model: ModelSpec,
    pub theta: f64,
    pub t_end: f64,
    pub dt: f64,
    pub delta_theta: f64,
    pub outputs: Vec<OutputTarget>,
    pub checks: Checks,
    pub tolerances: ToleranceConfig,
    pub eps_rank: f64,
}

impl RunConfig {
    pub fn from_builtin(
        name: &str,
        params: BTreeMap<String, f64>,
        t_end: f64,
        dt: f64,
    ) -> Result<Self, ConfigError> {
        let model = builtin_model(name, &params)?;
        let cfg = Self {
            theta: model.theta,
            source: ModelSource::Builtin(BuiltinRef {
                builtin: name.into(),
                params,
            }),
            model,
            t_end,
            dt,
            delta_theta: DEFAULT_DELTA_THETA,
            outputs: Vec::new(),
            checks: Checks::default(),
            tolerances: ToleranceConfig::default(),
            eps_rank: DEFAULT_EPS_RANK,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_name(&self) -> String {
        match &self.source {
            ModelSource::Builtin(b) => b.builtin.clone(),
            ModelSource::Spec(_) => "custom".into(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("t_end", self.t_end),
            ("dt", self.dt),
            ("delta_theta", self.delta_theta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invariant(format!("{name} > 0 (got {v})")));
            }
        }
        if !self.theta.is_finite() {
            return Err(ConfigError::Invariant("theta must be finite".into()));
        }
        for (k, out) in self.outputs.iter().enumerate() {
            if out.csv_path.is_none() && out.json_summary_path.is_none() {
                return Err(ConfigError::Invariant(format!(
                    "outputs[{k}] names neither csv_path nor json_summary_path"
                )));
            }
        }
        self.model.validate(&self.tolerances)?;
        Ok(())
    }
}

fn json_pointer(path: &serde_path_to_error::Path, message: &str, prefix: &str) -> String {
    use serde_path_to_error::Segment;
    let mut p = String::from(prefix);
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => {
                let _ = write!(p, "/{index}");
            }
            Segment::Map { key } => {
                let _ = write!(p, "/{}", key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    // Missing keys are reported against the enclosing object.
    for marker in ["missing field `", "unknown field `"] {
        if let Some(rest) = message.strip_prefix(marker) {
            if let Some(end) = rest.find('`') {
                let key = format!("/{}", &rest[..end]);
                if !p.ends_with(&key) {
                    p.push_str(&key);
                }
            }
        }
    }
    if p.is_empty() {
        p.push('/');
    }
    p
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let message = e.inner().to_string();
        ConfigError::Schema {
            pointer: json_pointer(e.path(), &message, prefix),
            message,
        }
    })
}

/// Parses and validates a JSON run configuration. Unknown keys are rejected.
pub fn parse_config(text: &[u8]) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_slice(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let raw: RawConfig = from_value(value, "")?;
    let source = match raw.model {
        Value::Object(ref map) if map.contains_key("builtin") => {
            ModelSource::Builtin(from_value(raw.model.clone(), "/model")?)
        }
        _ => ModelSource::Spec(from_value(raw.model.clone(), "/model")?),
    };
    let mut model = match &source {
        ModelSource::Builtin(b) => builtin_model(&b.builtin, &b.params)?,
        ModelSource::Spec(spec) => spec.clone(),
    };
    model.theta = raw.theta;
    let cfg = RunConfig {
        source,
        model,
        theta: raw.theta,
        t_end: raw.t_end,
        dt: raw.dt,
        delta_theta: raw.delta_theta,
        outputs: raw.outputs,
        checks: raw.checks,
        tolerances: ToleranceConfig::default(),
        eps_rank: DEFAULT_EPS_RANK,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case", deny_unknown_fields)]
pub enum Verdict {
    Holds,
    Violated { magnitude: f64 },
}

impl Verdict {
    fn from_probe(p: &crate::model::IngredientCheck) -> Self {
        if p.declared_zero && p.fd_max <= INGREDIENT_ZERO_TOL {
            Verdict::Holds
        } else {
            Verdict::Violated {
                magnitude: p.declared_max.max(p.fd_max),
            }
        }
    }

    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

/// θ-independence of each generator ingredient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionIi {
    pub hamiltonian: Verdict,
    pub gamma: Verdict,
    pub lindblad: Verdict,
    /// Largest gap between declared derivatives and central differences in θ.
    pub declared_vs_fd_mismatch: f64,
}

impl ConditionIi {
    pub fn holds(&self) -> bool {
        self.hamiltonian.holds() && self.gamma.holds() && self.lindblad.holds()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryTolerances {
    pub density: ToleranceConfig,
    pub eps_rank: f64,
    pub oracle: f64,
    pub flow_rel: f64,
    pub theta_consistency: f64,
    pub min_overlap: f64,
    pub interval_threshold: f64,
    pub ingredient_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub model: String,
    pub theta: f64,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub delta_theta: f64,
    pub max_qfi: f64,
    pub max_abs_flow_fd_minus_full_flow: f64,
    pub max_abs_flow_fd_minus_subflow_sum: f64,
    pub max_abs_ham_term: f64,
    pub max_abs_residual_t: f64,
    pub max_trace_drift: f64,
    pub max_drho_trace: f64,
    pub min_rho_eigenvalue: f64,
    pub max_imag_residue: f64,
    pub max_thresholded_pairs: usize,
    pub theta_consistency_deviation: Option<f64>,
    pub intervals: Vec<IntervalReport>,
    pub condition_ii: ConditionIi,
    pub condition_ii_probe: ThetaDerivativeCheck,
    pub tolerances: SummaryTolerances,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub records: Vec<FlowRecord>,
}

/// Propagates, evaluates every flow quantity, runs the enabled checks and
/// writes the requested outputs.
pub fn run_simulate(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let tol = &cfg.tolerances;
    let (center, probes) = std::thread::scope(|s| {
        let probes = cfg.checks.theta_consistency.then(|| {
            let plus = s.spawn(|| propagate(&cfg.model, cfg.theta + cfg.delta_theta, cfg.t_end, cfg.dt, tol));
            let minus = s.spawn(|| propagate(&cfg.model, cfg.theta - cfg.delta_theta, cfg.t_end, cfg.dt, tol));
            (plus, minus)
        });
        let center = propagate(&cfg.model, cfg.theta, cfg.t_end, cfg.dt, tol);
        let probes = probes.map(|(p, m)| {
            (
                p.join().expect("propagation thread panicked"),
                m.join().expect("propagation thread panicked"),
            )
        });
        (center, probes)
    });
    let traj = center?;
    let theta_dev = match probes {
        Some((p, m)) => Some(max_fd_deviation(&traj, &p?, &m?, cfg.delta_theta)),
        None => None,
    };

    let records = flow_records(&traj, cfg.eps_rank)?;
    let stats = FlowStats::from_records(&records);
    let intervals = classify_intervals(&records)?;

    let n = INGREDIENT_SAMPLES;
    let sample_times: Vec<f64> = (0..n).map(|k| cfg.t_end * k as f64 / (n - 1) as f64).collect();
    let probe = theta_derivative_check(&cfg.model, cfg.theta, &sample_times, cfg.delta_theta)
        .map_err(PropagationError::from)?;
    let condition_ii = ConditionIi {
        hamiltonian: Verdict::from_probe(&probe.hamiltonian),
        gamma: Verdict::from_probe(&probe.gamma),
        lindblad: Verdict::from_probe(&probe.lindblad),
        declared_vs_fd_mismatch: probe
            .hamiltonian
            .mismatch
            .max(probe.gamma.mismatch)
            .max(probe.lindblad.mismatch),
    };

    let oracle_tol = ORACLE_REL_TOL * stats.max_qfi.max(1.0);
    let mut checks = Vec::new();
    if cfg.checks.oracle {
        checks.push(CheckResult {
            name: "oracle_full_flow".into(),
            passed: stats.max_abs_fd_minus_full_flow <= oracle_tol,
            value: stats.max_abs_fd_minus_full_flow,
            tolerance: oracle_tol,
        });
        if condition_ii.holds() {
            // Both terms must vanish pointwise; report the worst relative size.
            let worst = records
                .iter()
                .map(|r| r.ham_term.abs().max(r.residual_t.abs()) / r.qfi.abs().max(1.0))
                .fold(0.0, f64::max);
            checks.push(CheckResult {
                name: "oracle_vanishing_terms".into(),
                passed: worst <= FLOW_REL_TOL,
                value: worst,
                tolerance: FLOW_REL_TOL,
            });
        }
    }
    if cfg.checks.decomposition {
        checks.push(CheckResult {
            name: "decomposition".into(),
            passed: stats.max_abs_fd_minus_subflow_sum <= oracle_tol,
            value: stats.max_abs_fd_minus_subflow_sum,
            tolerance: oracle_tol,
        });
    }
    if let Some(dev) = theta_dev {
        checks.push(CheckResult {
            name: "theta_consistency".into(),
            passed: dev <= THETA_CONSISTENCY_TOL,
            value: dev,
            tolerance: THETA_CONSISTENCY_TOL,
        });
    }
    if cfg.checks.intervals {
        let worst = intervals
            .iter()
            .filter_map(|r| r.overlap_fraction)
            .fold(1.0, f64::min);
        checks.push(CheckResult {
            name: "intervals".into(),
            passed: worst >= MIN_OVERLAP,
            value: worst,
            tolerance: MIN_OVERLAP,
        });
    }
    let passed = checks.iter().all(|c| c.passed);

    let summary = RunSummary {
        model: cfg.model_name(),
        theta: cfg.theta,
        t_end: cfg.t_end,
        dt: traj.meta.dt,
        steps: traj.meta.steps,
        delta_theta: cfg.delta_theta,
        max_qfi: stats.max_qfi,
        max_abs_flow_fd_minus_full_flow: stats.max_abs_fd_minus_full_flow,
        max_abs_flow_fd_minus_subflow_sum: stats.max_abs_fd_minus_subflow_sum,
        max_abs_ham_term: stats.max_abs_ham_term,
        max_abs_residual_t: stats.max_abs_residual_t,
        max_trace_drift: traj.meta.max_trace_drift,
        max_drho_trace: traj.meta.max_drho_trace,
        min_rho_eigenvalue: traj.meta.min_eigenvalue,
        max_imag_residue: stats.max_imag_residue,
        max_thresholded_pairs: stats.max_thresholded_pairs,
        theta_consistency_deviation: theta_dev,
        intervals,
        condition_ii,
        condition_ii_probe: probe,
        tolerances: SummaryTolerances {
            density: *tol,
            eps_rank: cfg.eps_rank,
            oracle: oracle_tol,
            flow_rel: FLOW_REL_TOL,
            theta_consistency: THETA_CONSISTENCY_TOL,
            min_overlap: MIN_OVERLAP,
            interval_threshold: INTERVAL_THRESHOLD,
            ingredient_zero: INGREDIENT_ZERO_TOL,
        },
        checks,
        passed,
    };

    for out in &cfg.outputs {
        if let Some(path) = &out.csv_path {
            emit_csv(&records, path)?;
        }
        if let Some(path) = &out.json_summary_path {
            emit_summary(&summary, path)?;
        }
    }
    Ok(RunOutcome { summary, records })
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header(records: &[FlowRecord]) -> String {
    let mut cols: Vec<String> = ["t", "F", "flow_fd", "full_flow", "ham_term", "residual_T"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if let Some(first) = records.first() {
        for s in &first.subflows {
            cols.push(format!("gamma_{}", s.label));
            cols.push(format!("J_{}", s.label));
            cols.push(format!("I_{}", s.label));
        }
    }
    cols.join(",")
}

/// Writes the per-grid-point flow table: 17 significant digits, LF endings.
pub fn write_csv<W: Write>(records: &[FlowRecord], mut w: W) -> io::Result<()> {
    if records.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no flow records"));
    }
    let mut buf = csv_header(records);
    buf.push('\n');
    for r in records {
        let mut row = vec![
            fmt17(r.t),
            fmt17(r.qfi),
            fmt17(r.flow_fd),
            fmt17(r.full_flow),
            fmt17(r.ham_term),
            fmt17(r.residual_t),
        ];
        for s in &r.subflows {
            row.extend([fmt17(s.gamma), fmt17(s.j), fmt17(s.i)]);
        }
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    w.write_all(buf.as_bytes())
}

pub fn emit_csv(records: &[FlowRecord], path: &Path) -> Result<(), RunError> {
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = io::BufWriter::new(file);
    write_csv(records, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn summary_json(summary: &RunSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary is serializable");
    s.push('\n');
    s
}

pub fn emit_summary(summary: &RunSummary, path: &Path) -> Result<(), RunError> {
    std::fs::write(path, summary_json(summary)).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}
