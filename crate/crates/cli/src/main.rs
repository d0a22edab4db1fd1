//! Command-line front end for the measure-MDP pipeline.
//!
//! One TOML config drives every stage: `build` writes the MDP artifact,
//! `solve` produces values and an agent policy, `simulate` and `regret`
//! roll the policy out, `sweep` repeats the pipeline over a grid or
//! resolution list, and `check` runs the verification suite.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or config error,
//! 3 artifact/config mismatch.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// A command failure carrying its process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation or config: exit 2.
    Usage(String),
    /// A verification check failed: exit 1.
    Check(String),
    /// Artifact built from a different config: exit 3.
    Mismatch(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Mismatch(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) | Failure::Check(msg) | Failure::Mismatch(msg) => {
                write!(f, "{msg}")
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "mfcontrol",
    version,
    about = "Finite measure-MDP pipeline: build, solve, simulate, regret, sweep, check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the measure MDP artifact described by the config.
    Build(CommonArgs),
    /// Solve the built artifact by value iteration.
    Solve(CommonArgs),
    /// Roll the extracted policy out and record a trajectory.
    Simulate(CommonArgs),
    /// Estimate the policy's regret against a finer baseline.
    Regret(CommonArgs),
    /// Repeat the pipeline over a list of M or n values.
    Sweep(CommonArgs),
    /// Run the verification suite for the configured model.
    Check(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count; unset keeps the library default.
    #[arg(long)]
    threads: Option<usize>,
    /// Solve tolerance override.
    #[arg(long)]
    tol: Option<f64>,
}

fn execute(args: &CommonArgs, run: fn(&RunConfig) -> Result<(), Failure>) -> Result<(), Failure> {
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool setup failed: {e}")))?;
    }
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.run.out = Some(out.clone());
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(tol) = args.tol {
        if !(tol > 0.0) {
            return Err(Failure::Usage("--tol must be positive".into()));
        }
        cfg.solve.tol = tol;
    }
    run(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, fn(&RunConfig) -> Result<(), Failure>) = match &cli.command {
        Command::Build(a) => (a, commands::cmd_build),
        Command::Solve(a) => (a, commands::cmd_solve),
        Command::Simulate(a) => (a, commands::cmd_simulate),
        Command::Regret(a) => (a, commands::cmd_regret),
        Command::Sweep(a) => (a, commands::cmd_sweep),
        Command::Check(a) => (a, commands::cmd_check),
    };
    match execute(args, run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
