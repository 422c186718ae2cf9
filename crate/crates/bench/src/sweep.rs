use rayon::prelude::*;
use tomolift::measurement::mix_seed;
use tomolift::{Experiment, ExperimentPlan, Method, RngSeed, TomoError};

use crate::config::{SweepSpec, SweepVariable};

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub method: Method,
    pub mean_mse: f64,
    /// Sample standard deviation over `√trials`; 0 when only one trial succeeded.
    pub stderr_mse: f64,
    /// Successful trials entering the means.
    pub trials: usize,
    pub mean_iterations: f64,
    pub mean_frobenius_sq: f64,
    pub failures: usize,
    pub single_trial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub point: usize,
    pub method: Method,
    pub trial: usize,
    pub result: Result<TrialMetrics, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub mse: f64,
    pub frobenius_sq: f64,
    pub iterations: usize,
}

/// Seed of trial `trial` at sweep point `point`.
pub fn trial_seed(base: RngSeed, point: usize, trial: usize) -> RngSeed {
    RngSeed(mix_seed(base.0, &[point as u64, trial as u64]))
}

/// Kahan-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Runs every (point, method, trial) triple on `jobs` worker threads and
/// returns outcomes sorted by `(point, method, trial)`.
pub fn run_trials(base: &ExperimentPlan, sweep: &SweepSpec, jobs: usize) -> Result<Vec<TrialOutcome>, TomoError> {
    let experiments = sweep
        .values
        .iter()
        .map(|&v| Experiment::new(sweep.variable.apply(base, v)))
        .collect::<Result<Vec<_>, _>>()?;
    let tasks: Vec<(usize, Method, usize)> = (0..experiments.len())
        .flat_map(|p| sweep.methods.iter().flat_map(move |&m| (0..sweep.trials).map(move |t| (p, m, t))))
        .collect();
    let run = |&(point, method, trial): &(usize, Method, usize)| {
        let seed = trial_seed(base.seed, point, trial);
        let result = experiments[point]
            .run_seeded(method, seed, trial as u64)
            .map(|r| TrialMetrics { mse: r.mse, frobenius_sq: r.frobenius_sq, iterations: r.total_iterations() })
            .map_err(|e| e.to_string());
        TrialOutcome { point, method, trial, result }
    };
    let mut outcomes: Vec<TrialOutcome> = if jobs <= 1 {
        tasks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TomoError::InvalidPlan(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| tasks.par_iter().map(run).collect())
    };
    outcomes.sort_by_key(|o| (o.point, o.method, o.trial));
    Ok(outcomes)
}

/// One row per (point, method), in sweep order.
pub fn aggregate(sweep: &SweepSpec, outcomes: &[TrialOutcome]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for (point, &value) in sweep.values.iter().enumerate() {
        for &method in &sweep.methods {
            let group: Vec<&TrialOutcome> =
                outcomes.iter().filter(|o| o.point == point && o.method == method).collect();
            let ok: Vec<TrialMetrics> = group.iter().filter_map(|o| o.result.as_ref().ok().copied()).collect();
            let k = ok.len();
            let mean = |f: &dyn Fn(&TrialMetrics) -> f64| {
                if k == 0 {
                    f64::NAN
                } else {
                    compensated_sum(ok.iter().map(f)) / k as f64
                }
            };
            let mean_mse = mean(&|m| m.mse);
            let stderr_mse = if k > 1 {
                let var = compensated_sum(ok.iter().map(|m| (m.mse - mean_mse).powi(2))) / (k - 1) as f64;
                (var / k as f64).sqrt()
            } else {
                0.0
            };
            rows.push(AggregateRow {
                variable: sweep.variable,
                value,
                method,
                mean_mse,
                stderr_mse,
                trials: k,
                mean_iterations: mean(&|m| m.iterations as f64),
                mean_frobenius_sq: mean(&|m| m.frobenius_sq),
                failures: group.len() - k,
                single_trial: k == 1,
            });
        }
    }
    rows
}

pub fn run_sweep(base: &ExperimentPlan, sweep: &SweepSpec, jobs: usize) -> Result<Vec<AggregateRow>, TomoError> {
    let outcomes = run_trials(base, sweep, jobs)?;
    Ok(aggregate(sweep, &outcomes))
}
