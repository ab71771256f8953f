//! `subcox`: simulate cohorts, estimate subgroup weights, fit weighted lasso
//! Cox models and run repeated train/test experiments.
//!
//! Errors are reported as one line prefixed `E_USAGE:`, `E_DATA:` or
//! `E_NUMERIC:`, with exit status 1, 2 or 3 respectively.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subcox::{Error, ErrorKind};

#[derive(Debug, Parser)]
#[command(
    name = "subcox",
    version,
    about = "Weighted lasso Cox regression for patient subgroups"
)]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a four-subgroup Weibull cohort and write it as CSV.
    Simulate(commands::SimulateArgs),
    /// Estimate subgroup weights with a cross-validated classifier.
    Weights(commands::WeightsArgs),
    /// Fit one weighted lasso Cox model for a target subgroup.
    Fit(commands::FitArgs),
    /// Run a repeated train/test experiment described by a TOML file.
    Experiment {
        /// Experiment configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Report directory, overriding the configuration.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

/// Failure of a command, tagged with its exit category.
#[derive(Debug)]
pub struct CliError {
    kind: ErrorKind,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn report(e: CliError) -> ExitCode {
    let (tag, code) = match e.kind {
        ErrorKind::Usage => ("E_USAGE", 1),
        ErrorKind::Data => ("E_DATA", 2),
        ErrorKind::Numerical => ("E_NUMERIC", 3),
    };
    let message = e.message.replace('\n', " ");
    eprintln!("{tag}: {message}");
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Weights(args) => commands::weights(&args),
        Command::Fit(args) => commands::fit(&args),
        Command::Experiment { config, output_dir } => commands::experiment(&config, output_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as Clap;
            if matches!(e.kind(), Clap::DisplayHelp | Clap::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let body = text.split("Usage:").next().unwrap_or_default();
            let message = body.split_whitespace().collect::<Vec<_>>().join(" ");
            return report(CliError::usage(message.trim_start_matches("error: ")));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}
