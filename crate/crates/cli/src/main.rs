use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use transfer_cli::{commands, selftest, CliError, ExperimentConfig, Outcome};

#[derive(Parser)]
#[command(name = "transfer", version, about = "Transfer-operator experiments on circle maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Leading eigendata, normalized potential and RPF measure.
    Rpf(RunArgs),
    /// Flatness certificate (series, runs or empirical).
    Flatness(RunArgs),
    /// Decay traces and fits.
    Decay(RunArgs),
    /// Wasserstein distance between two discrete measures.
    Wasserstein(RunArgs),
    /// Natural-coupling cost and trajectory export.
    Coupling(RunArgs),
    /// Property and invariant suite across modules.
    Selftest,
}

type Runner = fn(&ExperimentConfig, &Path) -> Result<Outcome, CliError>;

fn run_experiment(args: &RunArgs, runner: Runner) -> Result<Outcome, CliError> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory (--out or `output_dir`)".into()))?;
    runner(&cfg, &out)
}

fn run_selftest() -> i32 {
    let start = Instant::now();
    let results = selftest::run();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{} {:width$}  {:>8.3}s  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail,
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "{} checks, {} failed, {:.2}s total",
        results.len(),
        failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        0
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let (args, runner): (&RunArgs, Runner) = match &cli.command {
        Command::Selftest => return ExitCode::from(run_selftest() as u8),
        Command::Rpf(a) => (a, commands::rpf),
        Command::Flatness(a) => (a, commands::flatness),
        Command::Decay(a) => (a, commands::decay),
        Command::Wasserstein(a) => (a, commands::wasserstein_cmd),
        Command::Coupling(a) => (a, commands::coupling),
    };
    let code = match run_experiment(args, runner) {
        Ok(outcome) => {
            if outcome == Outcome::Refuted {
                eprintln!("result: refuted");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
