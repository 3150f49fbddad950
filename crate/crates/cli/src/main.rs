use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use deepc_cli::{experiments, ExperimentConfig, ExperimentKind};

/// Data-enabled predictive control experiments.
#[derive(Parser)]
#[command(name = "deepc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// MPC and DeePC closed loops on random LTI systems.
    Equivalence(Common),
    /// Figure-eight tracking with the quadcopter.
    Figure8(Common),
    /// Repeated position steps: regularized DeePC against ID+MPC.
    StepStats(Common),
    /// Regularization sweeps over lambda_g and lambda_y.
    RegSweep(Common),
    /// Generate a data set only.
    Collect(Common),
    /// One open-loop solve from files.
    Solve(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (flat key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of repetitions.
    #[arg(long)]
    reps: Option<usize>,
}

fn run(cli: Cli) -> Result<bool> {
    let (kind, common) = match cli.command {
        Command::Equivalence(c) => (ExperimentKind::Equivalence, c),
        Command::Figure8(c) => (ExperimentKind::Figure8, c),
        Command::StepStats(c) => (ExperimentKind::StepStats, c),
        Command::RegSweep(c) => (ExperimentKind::RegSweep, c),
        Command::Collect(c) => (ExperimentKind::Collect, c),
        Command::Solve(c) => (ExperimentKind::Solve, c),
    };
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(kind, path)?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = common.reps {
        cfg.reps = reps;
    }
    if let Some(out) = common.out {
        cfg.out = out;
    }
    cfg.validate()?;
    log::info!("running {kind} with seed {} into {}", cfg.seed, cfg.out.display());
    let report = experiments::run(&cfg)?;
    report.write(&cfg.out)?;
    print!("{}", report.summary());
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
