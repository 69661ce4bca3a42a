//! Experiment configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//! interaction = "swap"                  # swap | cnot-env | cnot-sys | bitflip
//! scenarios = ["nm-control", "m-free"]  # default: all four
//! n = [2, 3]
//! t_tot = { start = 0.5, stop = 21.0, points = 11 }   # or a list
//! omega = 0.3141592653589793            # default π/10
//! g = 1.0
//! # tau = 0.5                           # fixed interaction time per step
//! seed = 0
//! output = "sweep.csv"                  # default: standard output
//! record_timing = false
//!
//! [solver]
//! gap_tol = 1e-11
//! feas_tol = 1e-10
//! max_iters = 150
//!
//! [variational]
//! restarts = 20
//! max_iters = 400
//! fd_step = 1e-5
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use combqfi::channel::MAX_COPIES;
use combqfi::collision::{InteractionKind, Scenario};
use combqfi::qfi::QfiOptions;
use combqfi::variational::OptimizerConfig;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn field_err(field: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("field `{field}`: {msg}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Qfi,
    Sweep,
    Probe,
    Variational,
    ChannelNcopy,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Qfi => "qfi",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Probe => "probe",
            ExperimentKind::Variational => "variational",
            ExperimentKind::ChannelNcopy => "channel-ncopy",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        [ExperimentKind::Qfi, ExperimentKind::Sweep, ExperimentKind::Probe, ExperimentKind::Variational, ExperimentKind::ChannelNcopy]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| field_err("experiment", format!("unknown experiment '{s}'")))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    experiment: Option<String>,
    interaction: Option<String>,
    scenarios: Option<Vec<String>>,
    n: Vec<usize>,
    t_tot: RawGrid,
    omega: Option<f64>,
    g: Option<f64>,
    tau: Option<f64>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    record_timing: Option<bool>,
    solver: Option<RawSolver>,
    variational: Option<RawVariational>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawGrid {
    List(Vec<f64>),
    Range(RawRange),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    start: f64,
    stop: f64,
    points: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    gap_tol: Option<f64>,
    feas_tol: Option<f64>,
    max_iters: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariational {
    restarts: Option<usize>,
    max_iters: Option<usize>,
    fd_step: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub interaction: InteractionKind,
    pub scenarios: Vec<Scenario>,
    pub n: Vec<usize>,
    pub t_tot: Vec<f64>,
    pub omega: f64,
    pub g: f64,
    pub tau: Option<f64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub record_timing: bool,
    pub qfi: QfiOptions,
    pub optimizer: OptimizerConfig,
}

fn finite(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(field_err(field, format!("must be finite, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field_err(field, format!("must be positive, got {v}")))
    }
}

fn grid(raw: RawGrid) -> Result<Vec<f64>, ConfigError> {
    let pts = match raw {
        RawGrid::List(v) => v,
        RawGrid::Range(RawRange { start, stop, points }) => {
            finite("t_tot.start", start)?;
            finite("t_tot.stop", stop)?;
            match points {
                0 => Vec::new(),
                1 => vec![start],
                p => (0..p).map(|i| start + (stop - start) * i as f64 / (p - 1) as f64).collect(),
            }
        }
    };
    if pts.is_empty() {
        return Err(field_err("t_tot", "grid is empty"));
    }
    for &t in &pts {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(field_err("t_tot", format!("times must be finite and nonnegative, got {t}")));
        }
    }
    Ok(pts)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(field_err(
            "schema_version",
            format!("unsupported version {} (this build reads {SCHEMA_VERSION})", raw.schema_version),
        ));
    }
    let experiment = raw.experiment.as_deref().map(str::parse).transpose()?;
    let interaction = match raw.interaction.as_deref() {
        None => InteractionKind::PartialSwap,
        Some(s) => s.parse().map_err(|e| field_err("interaction", e))?,
    };
    let scenarios = match raw.scenarios {
        None => Scenario::ALL.to_vec(),
        Some(v) if v.is_empty() => return Err(field_err("scenarios", "list is empty")),
        Some(v) => v.iter().map(|s| s.parse().map_err(|e| field_err("scenarios", e))).collect::<Result<_, _>>()?,
    };
    if raw.n.is_empty() {
        return Err(field_err("n", "list is empty"));
    }
    if let Some(&bad) = raw.n.iter().find(|&&n| n == 0 || n > MAX_COPIES) {
        return Err(field_err("n", format!("step counts must lie in 1..={MAX_COPIES}, got {bad}")));
    }
    let t_tot = grid(raw.t_tot)?;
    let omega = finite("omega", raw.omega.unwrap_or(PI / 10.0))?;
    let g = finite("g", raw.g.unwrap_or(1.0))?;
    let tau = match raw.tau {
        Some(t) if !(t >= 0.0 && t.is_finite()) => return Err(field_err("tau", format!("must be finite and nonnegative, got {t}"))),
        t => t,
    };

    let mut qfi = QfiOptions::default();
    if let Some(s) = raw.solver {
        if let Some(v) = s.gap_tol {
            qfi.solver.gap_tol = positive("solver.gap_tol", v)?;
        }
        if let Some(v) = s.feas_tol {
            qfi.solver.feas_tol = positive("solver.feas_tol", v)?;
        }
        if let Some(v) = s.max_iters {
            if v == 0 {
                return Err(field_err("solver.max_iters", "must be at least 1"));
            }
            qfi.solver.max_iters = v;
        }
    }
    let mut optimizer = OptimizerConfig { seed: raw.seed.unwrap_or(0), ..Default::default() };
    if let Some(v) = raw.variational {
        if let Some(r) = v.restarts {
            if r == 0 {
                return Err(field_err("variational.restarts", "must be at least 1"));
            }
            optimizer.restarts = r;
        }
        if let Some(m) = v.max_iters {
            optimizer.max_iters = m;
        }
        if let Some(s) = v.fd_step {
            optimizer.fd_step = positive("variational.fd_step", s)?;
        }
    }
    Ok(ExperimentConfig {
        experiment,
        interaction,
        scenarios,
        n: raw.n,
        t_tot,
        omega,
        g,
        tau,
        seed: optimizer.seed,
        output: raw.output,
        record_timing: raw.record_timing.unwrap_or(false),
        qfi,
        optimizer,
    })
}

impl ExperimentConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.optimizer.seed = seed;
    }
}
