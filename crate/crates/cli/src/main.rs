//! `mmm`: calibration, pricing, simulation and hedging under the minimal
//! market model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "mmm",
    version,
    about = "Benchmark-approach pricing and hedging under the minimal market model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Fit (alpha0, eta) to the quadratic variation of an index file
    Calibrate,
    /// Minimal, risk-neutral and loading prices of a zero-coupon or CAT bond
    Price,
    /// CSV data behind the log-index, QV fit, ratio, fraction and hedge plots
    Figures,
    /// Exact discounted-NP paths
    Simulate,
    /// Hedge backtest and risk-minimization ledgers on a simulated path
    Hedge,
    /// Diversified CAT bond book: RMS of the average terminal P&L
    Book,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid inputs. Exit code 2.
    Usage(String),
    /// Numerical failure such as non-convergence. Exit code 3.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // one line, so callers can split on the first ": "
        let (tag, msg) = match self {
            Self::Usage(m) => ("usage", m),
            Self::Numerical(m) => ("numerical", m),
        };
        write!(f, "error[{tag}]: {}", msg.replace('\n', " "))
    }
}

impl From<mmm_core::Error> for CliError {
    fn from(e: mmm_core::Error) -> Self {
        match e {
            mmm_core::Error::DegenerateCurve => Self::Numerical(e.to_string()),
            other => Self::Usage(other.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::resolve(&cli.flags)?;
    commands::init_threads(config.threads)?;
    std::fs::create_dir_all(&config.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", config.out.display())))?;
    match cli.command {
        Command::Calibrate => commands::calibrate(&config),
        Command::Price => commands::price(&config),
        Command::Figures => commands::figures(&config),
        Command::Simulate => commands::simulate(&config),
        Command::Hedge => commands::hedge(&config),
        Command::Book => commands::book(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let err = CliError::Usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{err}");
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
