//! Command-line front end for the detection pipeline.
//!
//! Exit status contract: 0 on success, 1 when the invocation itself is
//! rejected (flags, environment, or a configuration file), 2 when the data
//! is rejected or the run fails on it. Progress and diagnostics go to the
//! error stream; machine-readable artifacts are written only beneath the
//! `--out` directory of the invoked subcommand.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

/// Failure channel: picks the exit status and nothing else.
#[derive(Debug)]
pub enum AppError {
    /// The command line, environment, or a configuration file is wrong.
    Usage(String),
    /// The input data failed to load or validate, or the pipeline failed
    /// while running on it.
    Data(String),
}

pub type AppResult = Result<(), AppError>;

#[derive(Parser)]
#[command(
    name = "ntlbench",
    version,
    about = "Non-technical-loss detection: synthetic data, rule/fuzzy/SVM classifiers, \
             and class-balance sweeps",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset as consumption and inspection CSVs
    Gen {
        /// Generator settings as JSON; built-in defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory receiving consumption.csv and inspections.csv
        #[arg(long)]
        out: PathBuf,
        /// Overrides the generator seed (NTLBENCH_SEED is the fallback)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check dataset CSVs against every structural invariant
    Validate {
        /// Monthly consumption CSV
        #[arg(long)]
        readings: PathBuf,
        /// Inspection outcomes CSV
        #[arg(long)]
        inspections: PathBuf,
    },
    /// Export per-customer feature, attribute, and exclusion tables as CSVs
    Features {
        /// Monthly consumption CSV
        #[arg(long)]
        readings: PathBuf,
        /// Inspection outcomes CSV
        #[arg(long)]
        inspections: PathBuf,
        /// Months of history per feature row
        #[arg(long, default_value_t = 12)]
        window: usize,
        /// Directory receiving features.csv, attributes.csv, exclusions.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one classifier with validation-based selection and save the model
    Train {
        /// Training settings as JSON: data source, classifier, split control
        #[arg(long)]
        config: PathBuf,
        /// Directory receiving the model file and train_report.json
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured seed (NTLBENCH_SEED is the fallback)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank customers that lack an inspection by model score
    Score {
        /// Monthly consumption CSV
        #[arg(long)]
        readings: PathBuf,
        /// Inspection outcomes CSV
        #[arg(long)]
        inspections: PathBuf,
        /// Saved model: .rules text or a JSON file from `train`/`sweep`
        #[arg(long)]
        model: PathBuf,
        /// Months of history per feature row
        #[arg(long, default_value_t = 12)]
        window: usize,
        /// Directory receiving scores.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a saved model to a labeled dataset and report its metrics
    Evaluate {
        /// Monthly consumption CSV
        #[arg(long)]
        readings: PathBuf,
        /// Inspection outcomes CSV
        #[arg(long)]
        inspections: PathBuf,
        /// Saved model: .rules text or a JSON file from `train`/`sweep`
        #[arg(long)]
        model: PathBuf,
        /// Months of history per feature row
        #[arg(long, default_value_t = 12)]
        window: usize,
        /// Directory receiving evaluation.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and score every configured classifier across class-balance levels
    Sweep {
        /// Experiment description as JSON
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to output_dir in the config
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the configured master seed (NTLBENCH_SEED is the fallback)
        #[arg(long)]
        seed: Option<u64>,
        /// Caps worker threads for training and evaluation cells (0 = automatic)
        #[arg(long)]
        jobs: Option<usize>,
        /// Comma-separated positive-class fractions replacing the configured levels
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// Examples drawn per cell, replacing the configured size
        #[arg(long)]
        target_size: Option<usize>,
        /// Months of history, replacing the configured window
        #[arg(long)]
        window: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let kind = err.kind();
            let _ = err.print();
            return match kind {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(AppError::Data(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
