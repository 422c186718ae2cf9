//! TOML experiment configuration.
//!
//! ```toml
//! [plan]
//! state = "cat"        # cat, noon, w, mixed, random, file
//! n = 2
//! N = 90000
//! R = 0.5
//! R2 = 0.0
//! method = "two_step"
//! seed = 0
//!
//! [sweep]
//! variable = "R"
//! values = [0.1, 0.5, 0.9]   # or: grid = { start = 0.1, stop = 0.9, count = 9 }
//! trials = 50
//! methods = ["fixed", "two_step"]
//! ```
//!
//! `random` states also take `rank` and `state_seed`; `file` states take
//! `path`, resolved relative to the config file. Optional `[solver]` and
//! `[selection]` tables override the numerical defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use tomolift::{ExperimentPlan, Method, QubitCount, RngSeed, SelectionConfig, SolverConfig, StateSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    N,
    R,
    R2,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::N => "N",
            SweepVariable::R => "R",
            SweepVariable::R2 => "R2",
        }
    }

    /// `plan` with this variable set to `value`.
    pub fn apply(self, plan: &ExperimentPlan, value: f64) -> ExperimentPlan {
        let mut plan = plan.clone();
        match self {
            SweepVariable::N => plan.copies = value.round() as u64,
            SweepVariable::R => plan.r = value,
            SweepVariable::R2 => plan.r2 = value,
        }
        plan
    }

    pub fn current(self, plan: &ExperimentPlan) -> f64 {
        match self {
            SweepVariable::N => plan.copies as f64,
            SweepVariable::R => plan.r,
            SweepVariable::R2 => plan.r2,
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepVariable {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "N" => Ok(SweepVariable::N),
            "R" => Ok(SweepVariable::R),
            "R2" => Ok(SweepVariable::R2),
            other => Err(ConfigError::Invalid(format!("unknown sweep variable `{other}` (expected N, R or R2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
}

impl SweepSpec {
    /// A single point at the plan's current `N`, for `run` and `compare`.
    pub fn single(plan: &ExperimentPlan, trials: usize, methods: Vec<Method>) -> Self {
        Self { variable: SweepVariable::N, values: vec![plan.copies as f64], trials, methods }
    }

    pub fn validate(&self, base: &ExperimentPlan) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::Invalid("sweep.trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(ConfigError::Invalid("sweep has no values".into()));
        }
        if self.methods.is_empty() {
            return Err(ConfigError::Invalid("sweep.methods is empty".into()));
        }
        for &value in &self.values {
            for &method in &self.methods {
                let plan = self.variable.apply(base, value).with_method(method);
                plan.validate().map_err(|e| {
                    ConfigError::Invalid(format!("sweep value {} = {value} with method {method}: {e}", self.variable))
                })?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plan: RawPlan,
    solver: Option<RawSolver>,
    selection: Option<RawSelection>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    state: String,
    n: usize,
    #[serde(rename = "N")]
    copies: u64,
    #[serde(rename = "R", default = "default_r")]
    r: f64,
    #[serde(rename = "R2", default)]
    r2: f64,
    method: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    oracle: bool,
    #[serde(default)]
    eq10_alt: bool,
    rank: Option<usize>,
    state_seed: Option<u64>,
    path: Option<PathBuf>,
}

fn default_r() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    max_iterations: Option<usize>,
    convergence_tolerance: Option<f64>,
    step_size: Option<f64>,
    penalty_parameter: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSelection {
    epsilon: Option<f64>,
    shrink_factor: Option<f64>,
    max_stages: Option<usize>,
    max_iterations: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: String,
    values: Option<Vec<f64>>,
    grid: Option<RawGrid>,
    #[serde(default = "default_trials")]
    trials: usize,
    methods: Option<Vec<String>>,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    start: f64,
    stop: f64,
    count: usize,
}

/// Evenly spaced grid; N sweeps are spaced logarithmically.
fn grid_values(variable: SweepVariable, grid: &RawGrid) -> Result<Vec<f64>, ConfigError> {
    if grid.count == 0 {
        return Err(ConfigError::Invalid("sweep.grid.count must be at least 1".into()));
    }
    if grid.count == 1 {
        return Ok(vec![grid.start]);
    }
    let steps = (grid.count - 1) as f64;
    let values = (0..grid.count).map(|k| {
        let t = k as f64 / steps;
        match variable {
            SweepVariable::N => (grid.start.ln() + t * (grid.stop.ln() - grid.start.ln())).exp().round(),
            _ => grid.start + t * (grid.stop - grid.start),
        }
    });
    Ok(values.collect())
}

fn parse_method(s: &str) -> Result<Method, ConfigError> {
    s.parse().map_err(|e: tomolift::TomoError| ConfigError::Invalid(e.to_string()))
}

/// Parses a config from text; relative state paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<(ExperimentPlan, SweepSpec), ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    let p = raw.plan;
    let n = QubitCount::new(p.n).map_err(|e| ConfigError::Invalid(format!("plan.n: {e}")))?;
    let state = match p.state.as_str() {
        "cat" => StateSpec::Cat,
        "noon" => StateSpec::Noon,
        "w" => StateSpec::W,
        "mixed" => StateSpec::MaximallyMixed,
        "random" => StateSpec::Random {
            rank: p.rank.ok_or_else(|| ConfigError::Invalid("random state needs plan.rank".into()))?,
            seed: p.state_seed.unwrap_or(0),
        },
        "file" => {
            let path = p.path.ok_or_else(|| ConfigError::Invalid("file state needs plan.path".into()))?;
            StateSpec::File(base_dir.join(path))
        }
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown state `{other}` (expected cat, noon, w, mixed, random or file)"
            )))
        }
    };
    let method = parse_method(&p.method)?;
    let mut plan = ExperimentPlan::new(n, state, p.copies, method);
    plan.r = p.r;
    plan.r2 = p.r2;
    plan.seed = RngSeed(p.seed);
    plan.oracle = p.oracle;
    plan.eq10_alt = p.eq10_alt;

    let mut solver = SolverConfig::default();
    if let Some(s) = raw.solver {
        solver.max_iterations = s.max_iterations.unwrap_or(solver.max_iterations);
        solver.convergence_tolerance = s.convergence_tolerance.unwrap_or(solver.convergence_tolerance);
        solver.step_size = s.step_size.unwrap_or(solver.step_size);
        solver.penalty_parameter = s.penalty_parameter.unwrap_or(solver.penalty_parameter);
    }
    plan.solver = solver;
    let mut selection = SelectionConfig::default();
    if let Some(s) = raw.selection {
        selection.epsilon = s.epsilon.unwrap_or(selection.epsilon);
        selection.shrink_factor = s.shrink_factor.unwrap_or(selection.shrink_factor);
        selection.max_stages = s.max_stages.unwrap_or(selection.max_stages);
        selection.max_iterations = s.max_iterations.unwrap_or(selection.max_iterations);
    }
    plan.selection = selection;
    validate_plan(&plan)?;

    let sweep = match raw.sweep {
        None => SweepSpec::single(&plan, 1, vec![method]),
        Some(s) => {
            let variable: SweepVariable = s.variable.parse()?;
            let values = match (s.values, s.grid) {
                (Some(v), None) => v,
                (None, Some(g)) => grid_values(variable, &g)?,
                _ => return Err(ConfigError::Invalid("sweep needs exactly one of `values` or `grid`".into())),
            };
            let methods = match s.methods {
                Some(m) => m.iter().map(|m| parse_method(m)).collect::<Result<_, _>>()?,
                None => vec![method],
            };
            SweepSpec { variable, values, trials: s.trials, methods }
        }
    };
    sweep.validate(&plan)?;
    Ok((plan, sweep))
}

pub fn parse_config(path: &Path) -> Result<(ExperimentPlan, SweepSpec), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Plan invariants plus a check that the target state can be built.
pub fn validate_plan(plan: &ExperimentPlan) -> Result<(), ConfigError> {
    plan.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    plan.state.build(plan.n).map_err(|e| ConfigError::Invalid(format!("state {}: {e}", plan.state)))?;
    Ok(())
}
