//! Command-line front end for the `sps_core` solvers.
//!
//! `sps <eigen|solve|axioms|sweep> [--config FILE] [--out DIR] [--seed N] [--threads N]`
//! reads one JSON experiment config, runs the command and writes
//! `report.json` plus `profile.csv` or `sweep.csv` into the output directory.
//! Exit status: 0 success, 1 numerical failure, 2 configuration error.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;

pub use commands::Output;
pub use config::{Command, ExperimentConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sps",
    version,
    about = "Radial Schrödinger–Poisson–Slater experiments"
)]
pub struct Args {
    #[command(subcommand)]
    pub command: CommandArg,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides `solver.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandArg {
    /// Ground state of the constrained eigenvalue problem and its dilation family.
    Eigen,
    /// Classify the nonlinearity and solve with the matching method.
    Solve,
    /// Check the dilation axioms on Gaussian seeds.
    Axioms,
    /// Solve over a list of exponents or coefficients.
    Sweep,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Eigen => Command::Eigen,
            CommandArg::Solve => Command::Solve,
            CommandArg::Axioms => Command::Axioms,
            CommandArg::Sweep => Command::Sweep,
        }
    }
}

/// Loads the config, applies the flag overrides and runs the command
/// without writing anything.
pub fn execute(args: &Args) -> Result<Output, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }
    let command = Command::from(args.command);
    let run = || match command {
        Command::Eigen => commands::eigen(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Axioms => commands::axioms(&cfg),
        Command::Sweep => commands::sweep(&cfg),
    };
    match args.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("--threads {n}: {e}")))?
            .install(run),
        None => run(),
    }
}

pub fn write_outputs(out: &Output, dir: &std::path::Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (name, contents) in &out.files {
        let path = dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Runs the command end to end and returns the process exit code.
pub fn run(args: &Args) -> i32 {
    let result = execute(args).and_then(|out| write_outputs(&out, &args.out).map(|()| out));
    match result {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            for line in &out.diagnostics {
                eprintln!("warning: {line}");
            }
            if out.success {
                0
            } else {
                eprintln!(
                    "sps {}: numerical failure, see {}",
                    Command::from(args.command).name(),
                    args.out.join(commands::REPORT_FILE).display()
                );
                1
            }
        }
        Err(e) => {
            eprintln!("sps: {e}");
            e.exit_code()
        }
    }
}
