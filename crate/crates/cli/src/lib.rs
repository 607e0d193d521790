//! Batch front-end for the pull-in solvers: configuration, subcommands,
//! lambda sweeps and CSV output.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    outcome_exit, sweep_table, CommandError, EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER,
    EXIT_TIME_LIMIT, EXIT_TOUCHDOWN,
};
pub use config::{parse_config, parse_with_overrides, ConfigError, Origin, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "pullin", version, about = "Electrostatic MEMS strip: evolution, steady states and pull-in")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time integration from `u0`.
    Simulate(Common),
    /// Newton solve from `u0` plus linear stability.
    Steady(Common),
    /// Continuation in lambda from zero.
    Branch(Common),
    /// Bisection on the dynamic outcome, checked against the branch fold.
    Pullin {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        parallel: bool,
    },
    /// Spectrum of the frozen operator at `u0`.
    Spectrum(Common),
    /// The same configuration under all three models.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        parallel: bool,
    },
    /// One evolution run per lambda.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated lambda values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambdas: Vec<f64>,
        #[arg(long)]
        parallel: bool,
    },
}

fn load(common: &Common) -> Result<RunConfig, CommandError> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            CommandError::Config(format!("cannot read config {}: {e}", path.display()))
        })?,
        None => String::new(),
    };
    parse_with_overrides(&text, &common.set).map_err(|e| CommandError::Config(e.to_string()))
}

fn dispatch(command: Command) -> Result<i32, CommandError> {
    match command {
        Command::Simulate(c) => commands::simulate(&load(&c)?),
        Command::Steady(c) => commands::steady(&load(&c)?),
        Command::Branch(c) => commands::branch(&load(&c)?),
        Command::Pullin { common, parallel } => commands::pullin(&load(&common)?, parallel),
        Command::Spectrum(c) => commands::spectrum(&load(&c)?),
        Command::Compare { common, parallel } => commands::compare(&load(&common)?, parallel),
        Command::Sweep {
            common,
            lambdas,
            parallel,
        } => commands::sweep(&load(&common)?, &lambdas, parallel),
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
