//! `gelfand` command-line front end: capacities, information spectra, coding
//! simulations and coded-state rate regions from JSON system descriptions.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gelfand::Error;

#[derive(Debug, Parser)]
#[command(name = "gelfand", version, about = "Capacities and coding experiments for channels with random state")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Capacity of the described system (or the mixed lower bound / Cesaro liminf).
    Capacity(RunArgs),
    /// Histogram and quantile summary of the normalized information density.
    Spectrum(RunArgs),
    /// Random-coding simulation with the error decomposition and its bound.
    Simulate(RunArgs),
    /// Frontier of the rate region with coded state at the decoder.
    Region(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON system description.
    #[arg(long)]
    pub spec: PathBuf,
    /// Directory receiving the output files (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coding trials (simulate).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Monte Carlo draws (spectrum; typicality probabilities in simulate).
    #[arg(long)]
    pub draws: Option<usize>,
    /// Blocklength (spectrum, simulate) or horizon (capacity of a sequence).
    #[arg(long)]
    pub n: Option<usize>,
    /// Exceedance mass of the spectral quantiles.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Worker threads; results do not depend on this value.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Invalid input or configuration (exit 2).
    Validation(String),
    /// Refused by a budget or desk-scale guard (exit 3).
    Budget(String),
    /// A result failed an internal consistency check (exit 4).
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Budget(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Budget(m) | Failure::Invariant(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Budget(_) | Error::TooLarge { .. } => Failure::Budget(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Capacity(a) => ("capacity", a),
        Command::Spectrum(a) => ("spectrum", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Region(a) => ("region", a),
    };
    let result = configure_workers(args.workers).and_then(|()| match &cli.command {
        Command::Capacity(a) => commands::capacity(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Region(a) => commands::region(a),
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("gelfand {name}: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn configure_workers(workers: Option<usize>) -> Result<(), Failure> {
    let Some(w) = workers else {
        return Ok(());
    };
    if w == 0 {
        return Err(Failure::Validation("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(w)
        .build_global()
        .map_err(|e| Failure::Invariant(format!("cannot start worker pool: {e}")))
}
