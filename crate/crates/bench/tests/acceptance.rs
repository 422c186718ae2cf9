//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run a subset with `cargo test --test acceptance -- 1 6 7`.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tomolift::{
    decompose_l1, dictionary, estimate_density_matrix, mse, project_simplex, CMatrix, DensityMatrix,
    EstimationProblem, Experiment, ExperimentPlan, FrequencyTable, Method, QubitCount, RngSeed, SelectionConfig,
    SolverConfig, StateSpec, C64,
};
use tomolift_bench::{run_sweep, AggregateRow, SweepSpec, SweepVariable};

const RANDOM_STATE: StateSpec = StateSpec::Random { rank: 4, seed: 7 };

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn q(n: usize) -> QubitCount {
    QubitCount::new(n).unwrap()
}

fn sweep(plan: &ExperimentPlan, variable: SweepVariable, values: Vec<f64>, trials: usize, methods: &[Method]) -> Vec<AggregateRow> {
    let spec = SweepSpec { variable, values, trials, methods: methods.to_vec() };
    spec.validate(plan).unwrap();
    let rows = run_sweep(plan, &spec, jobs()).unwrap();
    for r in &rows {
        assert_eq!(r.failures, 0, "failed trials at {} = {} ({})", r.variable, r.value, r.method);
    }
    rows
}

fn row(rows: &[AggregateRow], method: Method, value: f64) -> &AggregateRow {
    rows.iter().find(|r| r.method == method && (r.value - value).abs() < 1e-12).unwrap()
}

fn r_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

fn two_step_gain() -> Verdict {
    let plan = ExperimentPlan::new(q(2), StateSpec::Cat, 90_000, Method::TwoStep);
    let rows = sweep(&plan, SweepVariable::N, vec![90_000.0], 50, &[Method::Fixed, Method::TwoStep]);
    let fixed = row(&rows, Method::Fixed, 90_000.0);
    let adaptive = row(&rows, Method::TwoStep, 90_000.0);
    let pass = (1e-5..=1e-3).contains(&fixed.mean_mse)
        && adaptive.mean_mse <= 1e-6
        && adaptive.mean_mse <= fixed.mean_mse / 100.0;
    Verdict {
        pass,
        detail: format!(
            "fixed {:.3e} (need [1e-5, 1e-3]; Frobenius² {:.3e}), two-step {:.3e} (need ≤ 1e-6 and ≤ fixed/100; Frobenius² {:.3e})",
            fixed.mean_mse, fixed.mean_frobenius_sq, adaptive.mean_mse, adaptive.mean_frobenius_sq
        ),
    }
}

/// Least-squares slope and R² of `y` against `x`.
fn regression(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (slope, 1.0 - ss_res / ss_tot)
}

fn n_scaling() -> Verdict {
    let plan = ExperimentPlan::new(q(2), StateSpec::Cat, 9_000, Method::Fixed);
    let values = vec![9e3, 9e4, 9e5];
    let rows = sweep(&plan, SweepVariable::N, values.clone(), 20, &[Method::Fixed]);
    let x: Vec<f64> = values.iter().map(|v| v.log10()).collect();
    let y: Vec<f64> = values.iter().map(|&v| row(&rows, Method::Fixed, v).mean_mse.log10()).collect();
    let (slope, r2) = regression(&x, &y);
    Verdict {
        pass: (-1.3..=-0.7).contains(&slope) && r2 >= 0.95,
        detail: format!("slope {slope:.3} (need [-1.3, -0.7]), R² {r2:.4} (need ≥ 0.95)"),
    }
}

fn format_curve(rows: &[AggregateRow], method: Method) -> String {
    rows.iter()
        .filter(|r| r.method == method)
        .map(|r| format!("{}:{:.2e}", r.value, r.mean_mse))
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_r_sweep() -> Verdict {
    let plan = ExperimentPlan::new(q(2), RANDOM_STATE, 90_000, Method::TwoStep);
    let fixed = sweep(&plan, SweepVariable::N, vec![90_000.0], 100, &[Method::Fixed])[0].mean_mse;
    let rows = sweep(&plan, SweepVariable::R, r_grid(), 100, &[Method::TwoStep]);
    let beats_fixed = rows.iter().filter(|r| r.value >= 0.6 - 1e-12).all(|r| r.mean_mse < fixed);
    let best = rows.iter().min_by(|a, b| a.mean_mse.total_cmp(&b.mean_mse)).unwrap();
    let argmin_ok = (best.value - 2.0 / 3.0).abs() <= 0.15;
    Verdict {
        pass: beats_fixed && argmin_ok,
        detail: format!(
            "fixed {fixed:.3e}; two-step {}; beats fixed for R ≥ 0.6: {beats_fixed}; argmin R = {} (need 2/3 ± 0.15)",
            format_curve(&rows, Method::TwoStep),
            best.value
        ),
    }
}

fn w_state_sweep() -> Verdict {
    let plan = ExperimentPlan::new(q(3), StateSpec::W, 270_000, Method::TwoStep);
    let fixed = sweep(&plan, SweepVariable::N, vec![270_000.0], 20, &[Method::Fixed])[0].mean_mse;
    let rows = sweep(&plan, SweepVariable::R, r_grid(), 20, &[Method::TwoStep]);
    let pass = rows.iter().all(|r| r.mean_mse < fixed);
    Verdict { pass, detail: format!("fixed {fixed:.3e}; two-step {}", format_curve(&rows, Method::TwoStep)) }
}

fn three_step_gain() -> Verdict {
    let mut plan = ExperimentPlan::new(q(2), RANDOM_STATE, 90_000, Method::ThreeStep);
    plan.r = 2.0 / 3.0;
    let two = sweep(&plan, SweepVariable::N, vec![90_000.0], 50, &[Method::TwoStep]).remove(0);
    let r2_values = vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
    let rows = sweep(&plan, SweepVariable::R2, r2_values, 50, &[Method::ThreeStep]);
    let best = rows.iter().min_by(|a, b| a.mean_mse.total_cmp(&b.mean_mse)).unwrap();
    let pass = best.mean_mse + best.stderr_mse < two.mean_mse - two.stderr_mse;
    Verdict {
        pass,
        detail: format!(
            "two-step {:.3e} ± {:.1e}; best three-step R2 = {}: {:.3e} ± {:.1e}; three-step {}",
            two.mean_mse,
            two.stderr_mse,
            best.value,
            best.mean_mse,
            best.stderr_mse,
            format_curve(&rows, Method::ThreeStep)
        ),
    }
}

fn exact_problem(rho: &DensityMatrix) -> EstimationProblem {
    let table = FrequencyTable::predicted(rho).unwrap();
    EstimationProblem::from_table(&dictionary(rho.qubits()), &table).unwrap()
}

fn oracle_recovery() -> Verdict {
    let states = [
        ("cat-2", StateSpec::Cat, 2),
        ("noon-2", StateSpec::Noon, 2),
        ("w-3", StateSpec::W, 3),
        ("mixed-2", StateSpec::MaximallyMixed, 2),
        ("random-rank4", RANDOM_STATE, 2),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec, n) in states {
        let truth = spec.build(q(n)).unwrap();
        let (est, _) = estimate_density_matrix(&exact_problem(&truth), &SolverConfig::default()).unwrap();
        let err = mse(&truth, &est).unwrap();
        pass &= err <= 1e-8;
        parts.push(format!("{name} {err:.1e}"));
    }
    Verdict { pass, detail: format!("{} (need ≤ 1e-8)", parts.join(", ")) }
}

fn feasibility_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=3usize);
        let dict = dictionary(q(n));
        let freqs: Vec<f64> = (0..dict.len()).map(|_| rng.random_range(-0.5..1.5)).collect();
        let weights: Vec<f64> = (0..dict.len()).map(|_| rng.random_range(0.0..2.0)).collect();
        let problem = EstimationProblem::weighted(dict, freqs, weights).unwrap();
        let config = SolverConfig {
            max_iterations: rng.random_range(1..=400),
            step_size: rng.random_range(0.1..0.99),
            penalty_parameter: rng.random_range(0.1..10.0),
            ..SolverConfig::default()
        };
        let (rho, _) = estimate_density_matrix(&problem, &config).unwrap();
        let m = rho.matrix();
        worst.0 = worst.0.max((m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max));
        worst.1 = worst.1.max((rho.trace() - 1.0).norm());
        worst.2 = worst.2.min(rho.min_eigenvalue());
    }
    Verdict {
        pass: worst.0 <= 1e-12 && worst.1 <= 1e-9 && worst.2 >= -1e-9,
        detail: format!(
            "worst Hermitian defect {:.1e}, trace error {:.1e}, min eigenvalue {:.1e}",
            worst.0, worst.1, worst.2
        ),
    }
}

/// Exact minimum of `Σ|c_k|` subject to `Σ c_k M_k = ρ` over the six
/// single-qubit Pauli projectors `M = (I ± σ)/2`, by enumerating the basic
/// solutions of the split linear program `c = p − q`, `p, q ≥ 0`.
fn single_qubit_lp(bloch: [f64; 3]) -> f64 {
    // rows: trace, ⟨σx⟩, ⟨σy⟩, ⟨σz⟩; columns X+, X−, Y+, Y−, Z+, Z−
    let mut a = [[0.0; 12]; 4];
    for k in 0..6 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        a[0][k] = 1.0;
        a[1 + k / 2][k] = sign;
        for row in a.iter_mut() {
            row[k + 6] = -row[k];
        }
    }
    let b = [1.0, bloch[0], bloch[1], bloch[2]];
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << 12) {
        if mask.count_ones() != 4 {
            continue;
        }
        let cols: Vec<usize> = (0..12).filter(|c| mask & (1 << c) != 0).collect();
        let mut m = nalgebra::Matrix4::<f64>::zeros();
        for r in 0..4 {
            for (j, &c) in cols.iter().enumerate() {
                m[(r, j)] = a[r][c];
            }
        }
        let Some(x) = m.lu().solve(&nalgebra::Vector4::from(b)) else { continue };
        if x.iter().all(|v| *v >= -1e-12) && (m * x - nalgebra::Vector4::from(b)).amax() < 1e-9 {
            best = best.min(x.sum());
        }
    }
    best
}

fn selection_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dict = dictionary(q(1));
    let mut worst_rel = 0.0f64;
    let mut worst_residual = 0.0f64;
    for k in 0..100 {
        let mut r = [0.0; 3];
        loop {
            for x in &mut r {
                *x = rng.random_range(-1.0..1.0);
            }
            if r.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                break;
            }
        }
        if k % 10 == 0 {
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter_mut().for_each(|x| *x /= norm);
        }
        let rho = DensityMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new((1.0 + r[2]) / 2.0, 0.0),
                C64::new(r[0] / 2.0, -r[1] / 2.0),
                C64::new(r[0] / 2.0, r[1] / 2.0),
                C64::new((1.0 - r[2]) / 2.0, 0.0),
            ],
        ))
        .unwrap();
        let s = decompose_l1(&rho, &dict, &SelectionConfig::default()).unwrap();
        let exact = single_qubit_lp(r);
        worst_rel = worst_rel.max((s.l1_norm() - exact).abs() / exact);
        worst_residual = worst_residual.max(s.residual);
    }
    Verdict {
        pass: worst_rel <= 1e-3 && worst_residual <= 1e-5,
        detail: format!("worst relative L1 gap {worst_rel:.2e} (need ≤ 1e-3), worst residual {worst_residual:.2e} (need ≤ 1e-5)"),
    }
}

fn brute_force_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let theta = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut w = vec![0.0; n];
        for &i in &support {
            w[i] = v[i] - theta;
        }
        if w.iter().any(|x| *x < 0.0) {
            continue;
        }
        let dist: f64 = w.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, w));
        }
    }
    best.unwrap().1
}

fn conservation_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let states = [StateSpec::Cat, StateSpec::W, StateSpec::MaximallyMixed, RANDOM_STATE];
    let mut violations = 0;
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.random_range(1..=3usize);
        let settings = 3u64.pow(n as u32);
        let method = Method::ALL[rng.random_range(0..3)];
        let state = states[rng.random_range(0..states.len())].clone();
        if matches!(state, StateSpec::Random { .. } | StateSpec::W) && n < 2 {
            continue;
        }
        let mut plan = ExperimentPlan::new(q(n), state, rng.random_range(settings..50_000), method);
        plan.r = rng.random_range(0.01..0.99);
        plan.r2 = if method == Method::ThreeStep { rng.random_range(0.0..1.0 - plan.r) } else { 0.0 };
        plan.seed = RngSeed(rng.random());
        plan.solver.max_iterations = 50;
        if plan.validate().is_err() {
            continue;
        }
        checked += 1;
        let run = Experiment::new(plan.clone()).unwrap().run(0).unwrap();
        let (b1, b2, b3) = plan.round_budgets();
        let per_round_ok = run.rounds.iter().all(|r| {
            r.allocation.len() == settings as usize
                && r.allocation.total() == [b1, b2, b3][r.round as usize - 1]
        });
        if run.copies_consumed != plan.copies || !per_round_ok {
            violations += 1;
        }
    }
    let grid: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
    let mut mismatches = 0;
    for len in 1..=4u32 {
        for code in 0..9usize.pow(len) {
            let v: Vec<f64> = (0..len).map(|k| grid[code / 9usize.pow(k) % 9]).collect();
            if project_simplex(&v).unwrap() != brute_force_simplex(&v) {
                mismatches += 1;
            }
        }
    }
    Verdict {
        pass: violations == 0 && mismatches == 0,
        detail: format!("{violations} budget violations in {checked} plans, {mismatches} simplex mismatches on the grid"),
    }
}

fn determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("tomolift-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("sweep.toml");
    std::fs::write(
        &config,
        r#"
[plan]
state = "cat"
n = 2
N = 9000
method = "three_step"
R2 = 0.2
seed = 2024

[sweep]
variable = "R"
values = [0.3, 0.5, 0.7]
trials = 4
methods = ["fixed", "two_step", "three_step"]
"#,
    )
    .unwrap();
    let run = |jobs: &str, out: &str| -> Vec<u8> {
        let out: PathBuf = dir.join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_tomolift"))
            .args(["sweep", "--jobs", jobs, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("sweep.csv")).unwrap()
    };
    let serial = run("1", "serial");
    let again = run("1", "serial-again");
    let parallel = run("4", "parallel");
    let _ = std::fs::remove_dir_all(&dir);
    Verdict {
        pass: serial == again && serial == parallel,
        detail: format!(
            "serial rerun identical: {}, serial vs 4 workers identical: {} ({} bytes)",
            serial == again,
            serial == parallel,
            serial.len()
        ),
    }
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("two-step gain on cat-2", two_step_gain),
        ("N-scaling of fixed tomography", n_scaling),
        ("R-sweep on the random state", random_r_sweep),
        ("W-3 R-sweep", w_state_sweep),
        ("three-step gain on the random state", three_step_gain),
        ("oracle recovery", oracle_recovery),
        ("solver feasibility", feasibility_suite),
        ("selection LP oracle", selection_oracle),
        ("budget conservation and simplex grid", conservation_suite),
        ("serial/parallel determinism", determinism),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = check();
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        println!("[{status}] criterion {id:>2} {name}: {} [{:.1}s]", verdict.detail, start.elapsed().as_secs_f64());
        if !verdict.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
