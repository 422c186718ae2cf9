//! Fixed, two-step and three-step tomography runs.
//!
//! Copies are split into rounds as `⌊N·R⌋` (round 1), `⌊N·R₂⌋` (round 3,
//! three-step only) and whatever remains (round 2), so every method consumes
//! exactly `N` copies. Round 1 is always uniform over the `3ⁿ` settings;
//! later rounds follow the selection of the previous estimate.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Result, TomoError};
use crate::estimator::{estimate_density_matrix, Diagnostics, EstimationProblem, SolverConfig};
use crate::matrix_io::{load_density_matrix, save_matrix};
use crate::measurement::{exact_round, measure_round, CountTable, FrequencyTable, FrequencyVariant, RngSeed, RoundStream};
use crate::metrics::{frobenius_sq, mse, trace_distance};
use crate::pauli::{dictionary, ProjectorBasis};
use crate::selection::{select_settings, uniform_allocation, AllocationVector, SelectionConfig, SelectionRecord};
use crate::state::{cat_state, noon_state, random_density_matrix, w_state, DensityMatrix, QubitCount};

#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Cat,
    Noon,
    W,
    MaximallyMixed,
    Random { rank: usize, seed: u64 },
    File(PathBuf),
}

impl StateSpec {
    pub fn build(&self, n: QubitCount) -> Result<DensityMatrix> {
        match self {
            StateSpec::Cat => Ok(cat_state(n)),
            StateSpec::Noon => noon_state(n),
            StateSpec::W => w_state(n),
            StateSpec::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(n)),
            StateSpec::Random { rank, seed } => random_density_matrix(n, *rank, *seed),
            StateSpec::File(path) => {
                let rho = load_density_matrix(path)?;
                if rho.qubits() != n {
                    return Err(TomoError::DimensionMismatch { expected: n.dim(), got: rho.dim() });
                }
                Ok(rho)
            }
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Cat => write!(f, "cat"),
            StateSpec::Noon => write!(f, "noon"),
            StateSpec::W => write!(f, "w"),
            StateSpec::MaximallyMixed => write!(f, "mixed"),
            StateSpec::Random { rank, seed } => write!(f, "random(rank={rank},seed={seed})"),
            StateSpec::File(p) => write!(f, "file({})", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Fixed,
    TwoStep,
    ThreeStep,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fixed, Method::TwoStep, Method::ThreeStep];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fixed => "fixed",
            Method::TwoStep => "two_step",
            Method::ThreeStep => "three_step",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Method::Fixed),
            "two_step" => Ok(Method::TwoStep),
            "three_step" => Ok(Method::ThreeStep),
            other => Err(TomoError::InvalidPlan(format!(
                "unknown method `{other}` (expected fixed, two_step or three_step)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub n: QubitCount,
    pub state: StateSpec,
    /// Total copies `N`.
    pub copies: u64,
    /// Round-1 share `R`.
    pub r: f64,
    /// Round-3 share `R₂` (three-step only).
    pub r2: f64,
    pub seed: RngSeed,
    pub solver: SolverConfig,
    pub selection: SelectionConfig,
    pub method: Method,
    /// Replace sampled frequencies with exact Born probabilities.
    pub oracle: bool,
    /// Three-step variant pairing the `R₂` term with round-2 data and
    /// round-2 allocation; round 3 is then never measured.
    pub eq10_alt: bool,
}

impl ExperimentPlan {
    pub fn new(n: QubitCount, state: StateSpec, copies: u64, method: Method) -> Self {
        Self {
            n,
            state,
            copies,
            r: 0.5,
            r2: 0.0,
            seed: RngSeed(0),
            solver: SolverConfig::default(),
            selection: SelectionConfig::default(),
            method,
            oracle: false,
            eq10_alt: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let settings = self.n.settings() as u64;
        let fail = |msg: String| Err(TomoError::InvalidPlan(msg));
        if self.copies < settings {
            return fail(format!("N = {} is below the {} Pauli settings", self.copies, settings));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return fail(format!("R = {} must lie in (0, 1)", self.r));
        }
        if !(self.r2 >= 0.0 && self.r2 < 1.0) {
            return fail(format!("R2 = {} must lie in [0, 1)", self.r2));
        }
        if self.r + self.r2 >= 1.0 {
            return fail(format!("R + R2 = {} must be below 1", self.r + self.r2));
        }
        if self.round_budgets().0 < settings {
            return fail(format!(
                "N·R = {} leaves some of the {} settings unmeasured in round 1",
                self.round_budgets().0,
                settings
            ));
        }
        self.solver.validate()?;
        self.selection.validate()
    }

    /// `(round 1, round 2, round 3)` copy budgets for the plan's method.
    pub fn round_budgets(&self) -> (u64, u64, u64) {
        let n = self.copies;
        match self.method {
            Method::Fixed => (n, 0, 0),
            Method::TwoStep => {
                let r1 = (n as f64 * self.r).floor() as u64;
                (r1, n - r1, 0)
            }
            Method::ThreeStep => {
                let r1 = (n as f64 * self.r).floor() as u64;
                let r3 = (n as f64 * self.r2).floor() as u64;
                (r1, n - r1 - r3, r3)
            }
        }
    }

    pub fn with_method(&self, method: Method) -> Self {
        Self { method, ..self.clone() }
    }
}

/// `f3 = R·f1 + (1 − R)·f2·3ⁿN_μ/ΣN`.
pub fn combine_two_step(
    f1: &FrequencyTable,
    f2: &FrequencyTable,
    r: f64,
    allocation: &AllocationVector,
) -> FrequencyTable {
    combine_boosted(f1, &[(1.0 - r, f2)], r, &allocation.boost_factors(), FrequencyVariant::Combined)
}

/// `f5 = R·f1 + R₂·f2·3ⁿN_μ/ΣN + (1 − R − R₂)·f4·3ⁿN_μ/ΣN`.
pub fn combine_three_step(
    f1: &FrequencyTable,
    f2: &FrequencyTable,
    f4: &FrequencyTable,
    r: f64,
    r2: f64,
    allocation: &AllocationVector,
) -> Result<FrequencyTable> {
    combine_three_step_boosted(f1, f2, f4, r, r2, &allocation.boost_factors())
}

fn combine_three_step_boosted(
    f1: &FrequencyTable,
    f2: &FrequencyTable,
    f4: &FrequencyTable,
    r: f64,
    r2: f64,
    boost: &[f64],
) -> Result<FrequencyTable> {
    if r + r2 >= 1.0 {
        return Err(TomoError::InvalidPlan(format!("R + R2 = {} must be below 1", r + r2)));
    }
    Ok(combine_boosted(f1, &[(r2, f2), (1.0 - r - r2, f4)], r, boost, FrequencyVariant::ThreeStep))
}

fn combine_boosted(
    base: &FrequencyTable,
    boosted: &[(f64, &FrequencyTable)],
    r: f64,
    boost: &[f64],
    variant: FrequencyVariant,
) -> FrequencyTable {
    let rows = base
        .rows
        .iter()
        .enumerate()
        .map(|(mu, row)| {
            row.iter()
                .enumerate()
                .map(|(nu, &f1)| {
                    let extra: f64 = boosted.iter().map(|(w, t)| w * t.rows[mu][nu] * boost[mu]).sum();
                    r * f1 + extra
                })
                .collect()
        })
        .collect();
    FrequencyTable { variant, rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    /// `rho_E0`, `rho_E1` or `rho_E`.
    pub label: &'static str,
    pub estimate: DensityMatrix,
    pub diagnostics: Diagnostics,
    pub mse: f64,
    pub frobenius_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub allocation: AllocationVector,
    /// `None` in oracle mode.
    pub counts: Option<CountTable>,
    pub frequencies: FrequencyTable,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: Method,
    pub trial: u64,
    pub stages: Vec<StageResult>,
    pub rounds: Vec<RoundRecord>,
    /// Combined tables fed to the later estimates (`f3`, and `f5` for three-step).
    pub combined: Vec<FrequencyTable>,
    pub selections: Vec<SelectionRecord>,
    pub copies_consumed: u64,
    pub mse: f64,
    pub frobenius_sq: f64,
    pub trace_distance: f64,
    pub wall_time: Duration,
}

impl RunResult {
    pub fn final_stage(&self) -> &StageResult {
        self.stages.last().expect("every run has a final stage")
    }

    /// Solver iterations summed over every estimate of the run.
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.diagnostics.iterations).sum()
    }

    /// Key-value summary: plan echo, allocations, per-stage metrics.
    pub fn write_summary<W: Write>(&self, plan: &ExperimentPlan, mut w: W) -> std::io::Result<()> {
        writeln!(w, "method = {}", self.method)?;
        writeln!(w, "trial = {}", self.trial)?;
        writeln!(w, "n = {}", plan.n.get())?;
        writeln!(w, "state = {}", plan.state)?;
        writeln!(w, "N = {}", plan.copies)?;
        writeln!(w, "R = {}", plan.r)?;
        writeln!(w, "R2 = {}", plan.r2)?;
        writeln!(w, "seed = {}", plan.seed.0)?;
        writeln!(w, "oracle = {}", plan.oracle)?;
        writeln!(w, "eq10_alt = {}", plan.eq10_alt)?;
        writeln!(w, "copies_consumed = {}", self.copies_consumed)?;
        for round in &self.rounds {
            let alloc: Vec<String> = round.allocation.counts().iter().map(u64::to_string).collect();
            writeln!(w, "round.{}.allocation = {}", round.round, alloc.join(" "))?;
        }
        for (k, sel) in self.selections.iter().enumerate() {
            writeln!(w, "selection.{}.l1_norm = {:e}", k + 1, sel.l1_norm)?;
            writeln!(w, "selection.{}.residual = {:e}", k + 1, sel.residual)?;
        }
        for stage in &self.stages {
            let l = stage.label;
            writeln!(w, "stage.{l}.mse = {:e}", stage.mse)?;
            writeln!(w, "stage.{l}.frobenius_sq = {:e}", stage.frobenius_sq)?;
            writeln!(w, "stage.{l}.iterations = {}", stage.diagnostics.iterations)?;
            writeln!(w, "stage.{l}.objective = {:e}", stage.diagnostics.objective)?;
            writeln!(w, "stage.{l}.converged = {}", stage.diagnostics.converged)?;
        }
        writeln!(w, "mse = {:e}", self.mse)?;
        writeln!(w, "frobenius_sq = {:e}", self.frobenius_sq)?;
        writeln!(w, "trace_distance = {:e}", self.trace_distance)?;
        writeln!(w, "wall_time_s = {:.6}", self.wall_time.as_secs_f64())?;
        Ok(())
    }

    /// Writes `<prefix>.txt` plus one matrix file per stage.
    pub fn save(&self, plan: &ExperimentPlan, dir: &Path, prefix: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let file = std::fs::File::create(dir.join(format!("{prefix}.txt")))?;
        self.write_summary(plan, std::io::BufWriter::new(file))?;
        for stage in &self.stages {
            save_matrix(dir.join(format!("{prefix}_{}.txt", stage.label)), stage.estimate.matrix())?;
        }
        Ok(())
    }
}

/// A validated plan with its true state and projector dictionary built once,
/// ready to run any number of seeded trials.
#[derive(Debug, Clone)]
pub struct Experiment {
    plan: ExperimentPlan,
    truth: DensityMatrix,
    dictionary: Vec<ProjectorBasis>,
}

impl Experiment {
    pub fn new(plan: ExperimentPlan) -> Result<Self> {
        plan.validate()?;
        let truth = plan.state.build(plan.n)?;
        let dictionary = dictionary(plan.n);
        Ok(Self { plan, truth, dictionary })
    }

    pub fn plan(&self) -> &ExperimentPlan {
        &self.plan
    }

    pub fn truth(&self) -> &DensityMatrix {
        &self.truth
    }

    pub fn run(&self, trial: u64) -> Result<RunResult> {
        self.run_method(self.plan.method, trial)
    }

    pub fn run_method(&self, method: Method, trial: u64) -> Result<RunResult> {
        self.run_seeded(method, self.plan.seed, trial)
    }

    /// Runs `method` with `seed` in place of the plan's base seed.
    pub fn run_seeded(&self, method: Method, seed: RngSeed, trial: u64) -> Result<RunResult> {
        let start = Instant::now();
        let mut ctx = RunContext {
            exp: self,
            plan: ExperimentPlan { seed, ..self.plan.with_method(method) },
            trial,
            stages: vec![],
            rounds: vec![],
            combined: vec![],
            selections: vec![],
        };
        match method {
            Method::Fixed => ctx.fixed()?,
            Method::TwoStep => ctx.two_step()?,
            Method::ThreeStep => ctx.three_step()?,
        }
        let final_estimate = &ctx.stages.last().expect("final stage").estimate;
        let trace_distance = trace_distance(&self.truth, final_estimate)?;
        let copies_consumed = ctx.rounds.iter().map(|r| r.allocation.total()).sum();
        let last = ctx.stages.last().expect("final stage");
        Ok(RunResult {
            method,
            trial,
            mse: last.mse,
            frobenius_sq: last.frobenius_sq,
            trace_distance,
            stages: ctx.stages,
            rounds: ctx.rounds,
            combined: ctx.combined,
            selections: ctx.selections,
            copies_consumed,
            wall_time: start.elapsed(),
        })
    }
}

struct RunContext<'a> {
    exp: &'a Experiment,
    plan: ExperimentPlan,
    trial: u64,
    stages: Vec<StageResult>,
    rounds: Vec<RoundRecord>,
    combined: Vec<FrequencyTable>,
    selections: Vec<SelectionRecord>,
}

impl RunContext<'_> {
    fn measure(&mut self, round: u64, allocation: AllocationVector) -> Result<FrequencyTable> {
        let truth = &self.exp.truth;
        let (counts, frequencies) = if self.plan.oracle {
            (None, exact_round(truth, &allocation)?)
        } else {
            let stream = RoundStream { base: self.plan.seed, trial: self.trial, round };
            let (c, f) = measure_round(truth, &allocation, stream)?;
            (Some(c), f)
        };
        self.rounds.push(RoundRecord { round, allocation, counts, frequencies: frequencies.clone() });
        Ok(frequencies)
    }

    fn estimate(&mut self, label: &'static str, table: &FrequencyTable) -> Result<DensityMatrix> {
        let problem = EstimationProblem::from_table(&self.exp.dictionary, table)?;
        let (estimate, diagnostics) = estimate_density_matrix(&problem, &self.plan.solver)?;
        self.stages.push(StageResult {
            label,
            mse: mse(&self.exp.truth, &estimate)?,
            frobenius_sq: frobenius_sq(&self.exp.truth, &estimate)?,
            estimate: estimate.clone(),
            diagnostics,
        });
        Ok(estimate)
    }

    fn select(&mut self, rho: &DensityMatrix, budget: u64) -> Result<SelectionRecord> {
        let record = select_settings(rho, &self.exp.dictionary, &self.plan.selection, budget)?;
        self.selections.push(record.clone());
        Ok(record)
    }

    fn settings(&self) -> usize {
        self.plan.n.settings()
    }

    fn fixed(&mut self) -> Result<()> {
        let f1 = self.measure(1, uniform_allocation(self.settings(), self.plan.copies))?;
        self.estimate("rho_E", &f1)?;
        Ok(())
    }

    fn two_step(&mut self) -> Result<()> {
        let (b1, b2, _) = self.plan.round_budgets();
        let f1 = self.measure(1, uniform_allocation(self.settings(), b1))?;
        let rho_e0 = self.estimate("rho_E0", &f1)?;
        let sel = self.select(&rho_e0, b2)?;
        let f2 = self.measure(2, sel.allocation.clone())?;
        let f3 = combine_two_step(&f1, &f2, self.plan.r, &sel.allocation);
        self.combined.push(f3.clone());
        self.estimate("rho_E", &f3)?;
        Ok(())
    }

    fn three_step(&mut self) -> Result<()> {
        let (b1, b2, b3) = self.plan.round_budgets();
        let (r, r2) = (self.plan.r, self.plan.r2);
        let f1 = self.measure(1, uniform_allocation(self.settings(), b1))?;
        let rho_e0 = self.estimate("rho_E0", &f1)?;
        let sel2 = self.select(&rho_e0, b2)?;
        let f2 = self.measure(2, sel2.allocation.clone())?;
        // round-1 share of the copies consumed so far
        let f3 = combine_two_step(&f1, &f2, r / (1.0 - r2), &sel2.allocation);
        self.combined.push(f3.clone());
        let rho_e1 = self.estimate("rho_E1", &f3)?;
        let f4 = FrequencyTable::predicted(&rho_e1)?;

        let f5 = if self.plan.eq10_alt {
            combine_three_step(&f1, &f2, &f4, r, r2, &sel2.allocation)?
        } else {
            let sel3 = self.select(&rho_e1, b3)?;
            let f_round3 = self.measure(3, sel3.allocation.clone())?;
            let boost = if b3 > 0 {
                sel3.allocation.boost_factors()
            } else {
                // no round-3 copies: fall back to the ideal shares
                sel3.weights.iter().map(|w| w * self.settings() as f64).collect()
            };
            combine_three_step_boosted(&f1, &f_round3, &f4, r, r2, &boost)?
        };
        self.combined.push(f5.clone());
        self.estimate("rho_E", &f5)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: usize) -> QubitCount {
        QubitCount::new(n).unwrap()
    }

    fn table(rows: Vec<Vec<f64>>) -> FrequencyTable {
        FrequencyTable { variant: FrequencyVariant::Measured, rows }
    }

    fn single_row_alloc() -> AllocationVector {
        AllocationVector::new(vec![5])
    }

    #[test]
    fn two_step_arithmetic() {
        let f3 = combine_two_step(&table(vec![vec![0.9, 0.1]]), &table(vec![vec![0.8, 0.2]]), 0.5, &single_row_alloc());
        assert!((f3.rows[0][0] - 0.85).abs() < 1e-15);
        assert!((f3.rows[0][1] - 0.15).abs() < 1e-15);
        let f3 = combine_two_step(&table(vec![vec![0.7, 0.3]]), &table(vec![vec![0.6, 0.4]]), 0.5, &single_row_alloc());
        assert!((f3.rows[0][0] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn three_step_arithmetic() {
        let f5 = combine_three_step(
            &table(vec![vec![0.5, 0.5]]),
            &table(vec![vec![0.6, 0.4]]),
            &table(vec![vec![0.55, 0.45]]),
            0.5,
            0.25,
            &single_row_alloc(),
        )
        .unwrap();
        assert!((f5.rows[0][0] - 0.5375).abs() < 1e-15);
        assert!((f5.rows[0][1] - 0.4625).abs() < 1e-15);
        let bad = combine_three_step(&f5, &f5, &f5, 0.7, 0.3, &single_row_alloc());
        assert!(bad.is_err());
    }

    #[test]
    fn three_step_degenerate_weights() {
        let f1 = table(vec![vec![0.2, 0.8], vec![0.6, 0.4]]);
        let f4 = table(vec![vec![0.4, 0.6], vec![0.3, 0.7]]);
        let alloc = AllocationVector::new(vec![7, 7]);
        let f5 = combine_three_step(&f1, &f1, &f4, 0.3, 0.0, &alloc).unwrap();
        for mu in 0..2 {
            for nu in 0..2 {
                let want = 0.3 * f1.rows[mu][nu] + 0.7 * f4.rows[mu][nu];
                assert!((f5.rows[mu][nu] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn boost_uses_allocation_share() {
        let f1 = table(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let f2 = table(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        let alloc = AllocationVector::new(vec![3, 1]);
        let f3 = combine_two_step(&f1, &f2, 0.5, &alloc);
        assert!((f3.rows[0][0] - (0.25 + 0.5 * 1.5)).abs() < 1e-15);
        assert!((f3.rows[1][0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn plan_validation() {
        let plan = ExperimentPlan::new(q(2), StateSpec::Cat, 90_000, Method::TwoStep);
        assert!(plan.validate().is_ok());
        assert!(ExperimentPlan { copies: 5, ..plan.clone() }.validate().is_err());
        assert!(ExperimentPlan { r: 0.9, r2: 0.2, method: Method::ThreeStep, ..plan.clone() }.validate().is_err());
        assert!(ExperimentPlan { r: 0.0, ..plan.clone() }.validate().is_err());
        assert!(ExperimentPlan { copies: 10, r: 0.5, ..plan.clone() }.validate().is_err());
        assert!("bogus".parse::<Method>().is_err());
        assert_eq!("three_step".parse::<Method>().unwrap(), Method::ThreeStep);
    }

    #[test]
    fn fixed_budget_examples() {
        let exp = Experiment::new(ExperimentPlan::new(q(1), StateSpec::MaximallyMixed, 10, Method::Fixed)).unwrap();
        let run = exp.run(0).unwrap();
        assert_eq!(run.rounds[0].allocation.counts(), &[4, 3, 3]);
        assert_eq!(run.copies_consumed, 10);

        let exp = Experiment::new(ExperimentPlan::new(q(2), StateSpec::Cat, 90_000, Method::Fixed)).unwrap();
        let run = exp.run(0).unwrap();
        assert!(run.rounds[0].allocation.counts().iter().all(|&c| c == 10_000));
    }

    #[test]
    fn oracle_mode_recovers_cat_for_every_method() {
        let mut plan = ExperimentPlan::new(q(2), StateSpec::Cat, 9_000, Method::Fixed);
        plan.oracle = true;
        plan.r2 = 0.2;
        let exp = Experiment::new(plan).unwrap();
        for method in Method::ALL {
            let run = exp.run_method(method, 0).unwrap();
            assert!(run.mse <= 1e-8, "{method}: {}", run.mse);
            assert_eq!(run.copies_consumed, 9_000);
        }
    }

    #[test]
    fn runs_are_deterministic_and_feasible() {
        let mut plan = ExperimentPlan::new(q(2), StateSpec::Random { rank: 2, seed: 1 }, 3_000, Method::ThreeStep);
        plan.r = 0.4;
        plan.r2 = 0.3;
        let exp = Experiment::new(plan.clone()).unwrap();
        let a = exp.run(3).unwrap();
        let b = exp.run(3).unwrap();
        assert_eq!(a.stages, b.stages);
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.copies_consumed, 3_000);
        assert_eq!(a.stages.len(), 3);
        for stage in &a.stages {
            let rho = &stage.estimate;
            assert!((rho.trace() - 1.0).norm() <= 1e-9);
            assert!(rho.min_eigenvalue() >= -1e-9);
        }
        let mut summary = Vec::new();
        a.write_summary(&plan, &mut summary).unwrap();
        let text = String::from_utf8(summary).unwrap();
        assert!(text.contains("copies_consumed = 3000"));
        assert!(text.contains("stage.rho_E1.mse = "));
    }

    #[test]
    fn zero_round_three_budget_still_runs() {
        let mut plan = ExperimentPlan::new(q(2), StateSpec::Cat, 2_000, Method::ThreeStep);
        plan.r2 = 0.0;
        let run = Experiment::new(plan).unwrap().run(0).unwrap();
        assert_eq!(run.copies_consumed, 2_000);
        assert_eq!(run.rounds[2].allocation.total(), 0);
        assert!(run.final_stage().estimate.min_eigenvalue() >= -1e-9);
    }

    #[test]
    fn alternative_pairing_skips_round_three() {
        let mut plan = ExperimentPlan::new(q(2), StateSpec::Cat, 2_000, Method::ThreeStep);
        plan.r2 = 0.25;
        plan.eq10_alt = true;
        let run = Experiment::new(plan).unwrap().run(0).unwrap();
        assert_eq!(run.rounds.len(), 2);
        assert_eq!(run.copies_consumed, 1_500);
    }

    #[test]
    fn save_writes_summary_and_matrices() {
        let dir = std::env::temp_dir().join(format!("tomolift-save-{}", std::process::id()));
        let plan = ExperimentPlan::new(q(1), StateSpec::Cat, 300, Method::TwoStep);
        let run = Experiment::new(plan.clone()).unwrap().run(0).unwrap();
        run.save(&plan, &dir, "run").unwrap();
        let back = crate::matrix_io::load_density_matrix(dir.join("run_rho_E.txt")).unwrap();
        assert!((back.matrix() - run.final_stage().estimate.matrix()).norm() < 1e-12);
        assert!(dir.join("run.txt").exists());
        std::fs::remove_dir_all(dir).unwrap();
    }

    proptest! {
        #[test]
        fn uniform_two_step_is_convex(
            f1 in prop::collection::vec(0.0f64..1.0, 6),
            f2 in prop::collection::vec(0.0f64..1.0, 6),
            r in 0.01f64..0.99,
        ) {
            let t1 = table(f1.chunks(2).map(<[f64]>::to_vec).collect());
            let t2 = table(f2.chunks(2).map(<[f64]>::to_vec).collect());
            let f3 = combine_two_step(&t1, &t2, r, &AllocationVector::new(vec![4, 4, 4]));
            for (i, v) in f3.flatten().iter().enumerate() {
                prop_assert!(*v >= f1[i].min(f2[i]) - 1e-15 && *v <= f1[i].max(f2[i]) + 1e-15);
            }
        }

        #[test]
        fn combination_matches_scalar_recompute(
            f in prop::collection::vec(0.0f64..1.0, 27),
            counts in prop::collection::vec(0u64..50, 9),
            r in 0.05f64..0.6,
            r2 in 0.0f64..0.35,
        ) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let rows = |k: usize| table(f[..18].chunks(2).map(|c| c.iter().map(|x| (x + k as f64 * 0.1) % 1.0).collect()).collect());
            let (t1, t2, t4) = (rows(0), rows(1), rows(2));
            let alloc = AllocationVector::new(counts.clone());
            let total: u64 = counts.iter().sum();
            let f3 = combine_two_step(&t1, &t2, r, &alloc);
            let f5 = combine_three_step(&t1, &t2, &t4, r, r2, &alloc).unwrap();
            for mu in 0..9 {
                let boost = 9.0 * counts[mu] as f64 / total as f64;
                for nu in 0..2 {
                    let a = t1.rows[mu][nu];
                    let b = t2.rows[mu][nu];
                    let c = t4.rows[mu][nu];
                    prop_assert!((f3.rows[mu][nu] - (r * a + (1.0 - r) * b * boost)).abs() < 1e-12);
                    let want = r * a + r2 * b * boost + (1.0 - r - r2) * c * boost;
                    prop_assert!((f5.rows[mu][nu] - want).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn budgets_conserve_copies(copies in 27u64..1_000_000, r in 0.01f64..0.98, r2 in 0.0f64..0.98) {
            prop_assume!(r + r2 < 1.0);
            let mut plan = ExperimentPlan::new(q(3), StateSpec::W, copies, Method::ThreeStep);
            plan.r = r;
            plan.r2 = r2;
            for method in Method::ALL {
                let (a, b, c) = plan.with_method(method).round_budgets();
                prop_assert_eq!(a + b + c, copies);
            }
        }
    }
}
