use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tomolift::{Experiment, ExperimentPlan, Method, RngSeed};
use tomolift_bench::{config, parse_config, run_sweep, save_csv, save_plot, trial_seed, AggregateRow, ConfigError, SweepSpec};

#[derive(Parser)]
#[command(name = "tomolift", version, about = "Adaptive quantum state tomography benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured plan and dump every intermediate artifact.
    Run(Common),
    /// Sweep N, R or R2 as described in the config's [sweep] table.
    Sweep(Common),
    /// Run fixed, two-step and three-step on the same plan.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "TOMOLIFT_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Also write an SVG plot.
    #[arg(long)]
    plot: bool,
    /// Use exact Born probabilities instead of sampled counts.
    #[arg(long)]
    oracle: bool,
    /// Pair the R2 term of the three-step combination with round-2 data.
    #[arg(long)]
    eq10_alt: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<tomolift::TomoError> for Failure {
    fn from(e: tomolift::TomoError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load(args: &Common) -> Result<(ExperimentPlan, SweepSpec), Failure> {
    let (mut plan, mut sweep) = parse_config(&args.config)?;
    if let Some(seed) = args.seed {
        plan.seed = RngSeed(seed);
    }
    if let Some(trials) = args.trials {
        sweep.trials = trials;
    }
    plan.oracle |= args.oracle;
    plan.eq10_alt |= args.eq10_alt;
    if args.jobs == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    sweep.validate(&plan)?;
    Ok((plan, sweep))
}

fn print_rows(rows: &[AggregateRow]) {
    println!("{:>6} {:>12} {:>11} {:>12} {:>12} {:>12} {:>7}", "var", "value", "method", "mean_mse", "stderr", "frob_sq", "trials");
    for r in rows {
        println!(
            "{:>6} {:>12} {:>11} {:>12.4e} {:>12.4e} {:>12.4e} {:>7}",
            r.variable.as_str(),
            r.value,
            r.method.as_str(),
            r.mean_mse,
            r.stderr_mse,
            r.mean_frobenius_sq,
            r.trials
        );
        if r.failures > 0 {
            eprintln!("warning: {} failed trial(s) excluded at {} = {} ({})", r.failures, r.variable, r.value, r.method);
        }
    }
}

fn emit(rows: &[AggregateRow], out: &Path, name: &str, plot: bool) -> Result<(), Failure> {
    std::fs::create_dir_all(out)?;
    let csv = out.join(format!("{name}.csv"));
    save_csv(rows, &csv)?;
    println!("wrote {}", csv.display());
    if plot {
        let svg = out.join(format!("{name}.svg"));
        save_plot(rows, &svg).map_err(|e| Failure::Runtime(format!("plot: {e}")))?;
        println!("wrote {}", svg.display());
    }
    Ok(())
}

fn create(path: PathBuf) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(args: &Common) -> Result<(), Failure> {
    let (mut plan, _) = load(args)?;
    let trials = args.trials.unwrap_or(1);
    plan.solver.record_trace = true;
    config::validate_plan(&plan)?;
    std::fs::create_dir_all(&args.out)?;
    let exp = Experiment::new(plan.clone())?;
    let mut counts = create(args.out.join("counts.csv"))?;
    let mut header = true;
    for t in 0..trials {
        let result = exp.run_seeded(plan.method, trial_seed(plan.seed, 0, t), t as u64)?;
        let prefix = format!("run_{t}");
        result.save(&plan, &args.out, &prefix)?;
        for round in &result.rounds {
            if let Some(c) = &round.counts {
                c.write_csv(&mut counts, t as u64, round.round, header)?;
                header = false;
            }
        }
        for (k, sel) in result.selections.iter().enumerate() {
            sel.write_csv(create(args.out.join(format!("{prefix}_selection_{}.csv", k + 1)))?)?;
        }
        for stage in &result.stages {
            stage.diagnostics.write_csv(create(args.out.join(format!("{prefix}_diagnostics_{}.csv", stage.label)))?)?;
        }
        println!(
            "trial {t}: method {} mse {:.4e} frobenius_sq {:.4e} trace_distance {:.4e} copies {}",
            result.method, result.mse, result.frobenius_sq, result.trace_distance, result.copies_consumed
        );
    }
    counts.flush()?;
    Ok(())
}

fn sweep(args: &Common) -> Result<(), Failure> {
    let (plan, sweep) = load(args)?;
    let rows = run_sweep(&plan, &sweep, args.jobs)?;
    print_rows(&rows);
    emit(&rows, &args.out, "sweep", args.plot)
}

fn compare(args: &Common) -> Result<(), Failure> {
    let (plan, sweep) = load(args)?;
    let single = SweepSpec::single(&plan, sweep.trials, Method::ALL.to_vec());
    single.validate(&plan)?;
    let rows = run_sweep(&plan, &single, args.jobs)?;
    print_rows(&rows);
    emit(&rows, &args.out, "compare", args.plot)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Compare(args) => compare(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
