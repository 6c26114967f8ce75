//! Command-line front end: `train`, `compare`, `field` and `sensitivity`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 training failure,
//! 4 unreadable checkpoint.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Training(_) | CliError::Output(_) => 3,
            CliError::Checkpoint(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Output(format!("{}: {e}", path.display()))
    }
}

impl From<mgamsgd::Error> for CliError {
    fn from(e: mgamsgd::Error) -> Self {
        match e {
            mgamsgd::Error::Config(_)
            | mgamsgd::Error::Domain(_)
            | mgamsgd::Error::Dimension { .. } => CliError::Config(e.to_string()),
            _ => CliError::Training(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mgamsgd",
    version,
    about = "Mesh-free neural solver for 3D linear elastostatics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network and write checkpoint, report and loss curve.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Race the hybrid pipeline against plain SGD and Adam on equal wall-clock budgets.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 60.0)]
        budget_seconds: f64,
        /// Number of seeds, starting from the configured seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value = "compare")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a uniform grid.
    Field {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        /// Append the error against the closed-form end-load field.
        #[arg(long)]
        error: bool,
        /// Material for `--error`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// One-at-a-time sensitivity sweep over the training hyperparameters.
    Sensitivity {
        /// Template for settings that are not swept.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, seed, out } => commands::train(config.as_deref(), seed, &out),
        Command::Compare {
            config,
            budget_seconds,
            seeds,
            out,
        } => commands::compare(config.as_deref(), budget_seconds, seeds, &out),
        Command::Field {
            checkpoint,
            grid,
            out,
            error,
            config,
        } => commands::field(&checkpoint, grid, &out, error, config.as_deref()),
        Command::Sensitivity {
            config,
            levels,
            reps,
            out,
        } => commands::sensitivity(config.as_deref(), levels, reps, &out),
    }
}
