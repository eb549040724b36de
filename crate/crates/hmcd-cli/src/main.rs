//! Command-line front end for community detection across partially aligned
//! social networks: `generate` writes synthetic benchmark datasets, `detect`
//! factorizes a dataset into partitions, `evaluate` scores those partitions.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hmcd::HmcdError;

#[derive(Parser)]
#[command(
    name = "hmcd",
    version,
    about = "Community detection across partially aligned social networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-network benchmark dataset.
    Generate(CommandArgs),
    /// Detect communities in a dataset and write partitions plus a trace.
    Detect(CommandArgs),
    /// Score detected partitions, optionally against planted ground truth.
    Evaluate(CommandArgs),
}

#[derive(clap::Args)]
struct CommandArgs {
    /// Run configuration file (TOML).
    config: PathBuf,
    /// Override a config key, e.g. --set hyper.k=8 or --set output=runs/a.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Failures sorted by exit code: bad invocations or configs exit 1, data
/// problems exit 2, solver divergence exits 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Run(#[from] HmcdError),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Run(HmcdError::Solver { .. }) => 3,
            CliError::Run(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HMCD_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Generate(args) => config::load(&args.config, &args.set).and_then(run::generate),
        Command::Detect(args) => config::load(&args.config, &args.set).and_then(run::detect),
        Command::Evaluate(args) => config::load(&args.config, &args.set).and_then(run::evaluate),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code())
        }
    }
}
