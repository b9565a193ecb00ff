//! `epbloch`: simulate Bloch signals, invert them, map and locate
//! exceptional points, and estimate system parameters.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical
//! non-convergence (the report is still written).

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{EstimateFlags, FindEp3Flags, InvertFlags, MapFlags, ScanFlags, SimulateFlags};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl From<epbloch::Error> for CliError {
    fn from(e: epbloch::Error) -> Self {
        use epbloch::Error as E;
        match e {
            E::Numerical(_) | E::NoConvergence(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "epbloch", version, about = "Exceptional points of the driven, damped two-level Bloch equations")]
struct Cli {
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Worker threads (default: EPBLOCH_THREADS, else available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample S_z(t) of the Bloch equation to CSV.
    Simulate(SimulateFlags),
    /// Harmonic inversion of a CSV time series.
    Invert(InvertFlags),
    /// Grid of F, min gap, amplitude norm and region over (Δ, ε).
    Map(MapFlags),
    /// Locate an EP2 on a line of constant ε.
    #[command(name = "scan-ep2")]
    ScanEp2(ScanFlags),
    /// Locate the EP3 by valley ascend or (p, q) root search.
    #[command(name = "find-ep3")]
    FindEp3(FindEp3Flags),
    /// Estimate (ω_s, μ, Γ) from an EP3.
    Estimate(EstimateFlags),
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("EPBLOCH_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("EPBLOCH_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(CliError::Usage("thread count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {n} threads: {e}")))?;
    }
    let file = cli.config.as_deref();
    match cli.command {
        Command::Simulate(f) => commands::simulate(&f, file),
        Command::Invert(f) => commands::invert(&f, file),
        Command::Map(f) => commands::map(&f, file),
        Command::ScanEp2(f) => commands::scan_ep2(&f, file),
        Command::FindEp3(f) => commands::find_ep3(&f, file),
        Command::Estimate(f) => commands::estimate(&f, file),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
