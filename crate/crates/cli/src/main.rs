//! Command-line driver: runs one configured experiment, or the verification suites.
//!
//! Exit codes: 0 success, 1 I/O failure or failing checks, 2 invalid
//! configuration, 3 numerical abort.

mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{ConfigError, ExperimentConfig, Task, Violation};
use gpwave::verify::{run_identity_suite, run_rate_suite, write_report, Budget, Status};
use tasks::RunError;

#[derive(Parser)]
#[command(name = "gpwave", version, about = "Gross-Pitaevskii perturbation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task named in the configuration.
    Run(RunArgs),
    Simulate(RunArgs),
    Scatter(RunArgs),
    Decay(RunArgs),
    PhaseScan(RunArgs),
    VerifySymbols(RunArgs),
    NormalForm(RunArgs),
    Oracle(RunArgs),
    /// Run the identity and rate suites and print one line per check.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    config: PathBuf,
    /// Overrides `out_dir` of the configuration.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write gnuplot scripts for the norm tables.
    #[arg(long)]
    emit_gnuplot: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Identity,
    Rate,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum BudgetArg {
    Quick,
    Full,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "quick")]
    budget: BudgetArg,
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    /// CSV report with one row per check.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn invalid(path: &str, message: String) -> RunError {
    RunError::Invalid(vec![Violation {
        path: path.into(),
        message,
    }])
}

fn configure_threads() -> Result<(), RunError> {
    let Ok(v) = std::env::var("GP_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| invalid("GP_THREADS", format!("must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| RunError::Other(e.to_string()))
}

fn run_experiment(args: &RunArgs, expected: Option<Task>) -> Result<(), RunError> {
    let cfg = ExperimentConfig::from_path(&args.config).map_err(|e| match e {
        ConfigError::Io(m) => RunError::Other(m),
        ConfigError::Invalid(v) => RunError::Invalid(v),
    })?;
    if let Some(t) = expected {
        if t != cfg.task {
            return Err(invalid("task", format!("configuration is for {}, not {}", cfg.task.name(), t.name())));
        }
    }
    let dir = args.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
    std::fs::create_dir_all(&dir)?;
    let outputs = tasks::run_task(&cfg, &dir)?;
    let scripts = if args.emit_gnuplot { tasks::emit_gnuplot(&dir, &outputs)? } else { Vec::new() };
    let manifest = tasks::manifest(&cfg, &dir, &outputs, &scripts)?;
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Other(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    for (k, v) in &outputs.summary {
        println!("{k} = {v}");
    }
    println!("wrote {} files to {}", outputs.files.len() + scripts.len() + 1, dir.display());
    if outputs.checks_failed {
        return Err(RunError::Other("some checks failed; see checks.csv".into()));
    }
    Ok(())
}

fn verify(args: &VerifyArgs) -> Result<(), RunError> {
    let budget = match args.budget {
        BudgetArg::Quick => Budget::Quick,
        BudgetArg::Full => Budget::Full,
    };
    let mut results = Vec::new();
    if matches!(args.suite, Suite::Identity | Suite::All) {
        results.extend(run_identity_suite()?);
    }
    if matches!(args.suite, Suite::Rate | Suite::All) {
        results.extend(run_rate_suite(budget)?);
    }
    for r in &results {
        println!("{r}");
    }
    if let Some(path) = &args.report {
        write_report(path, &results)?;
    }
    let count = |s: Status| results.iter().filter(|r| r.status == s).count();
    println!("{} passed, {} failed, {} skipped", count(Status::Pass), count(Status::Fail), count(Status::Skip));
    if count(Status::Fail) > 0 {
        return Err(RunError::Other("some checks failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Run(a) => run_experiment(a, None),
        Command::Simulate(a) => run_experiment(a, Some(Task::Simulate)),
        Command::Scatter(a) => run_experiment(a, Some(Task::Scatter)),
        Command::Decay(a) => run_experiment(a, Some(Task::Decay)),
        Command::PhaseScan(a) => run_experiment(a, Some(Task::PhaseScan)),
        Command::VerifySymbols(a) => run_experiment(a, Some(Task::VerifySymbols)),
        Command::NormalForm(a) => run_experiment(a, Some(Task::NormalForm)),
        Command::Oracle(a) => run_experiment(a, Some(Task::Oracle)),
        Command::Verify(a) => verify(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                RunError::Invalid(v) => {
                    eprintln!("invalid configuration:");
                    for x in v {
                        eprintln!("  {x}");
                    }
                }
                RunError::Numerical(m) => eprintln!("numerical abort: {m}"),
                RunError::Other(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
