//! The `dsi` command line.
//!
//! Exit codes: 0 success, 1 property violation, 2 usage or config error,
//! 3 every sweep cell failed. `DSI_THREADS` sets the default worker count
//! for sweeps, pair reports and `verify-lossless`.

mod analysis;
mod grids;
mod manifest;
mod simulate;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use manifest::RunManifest;

pub const THREADS_ENV: &str = "DSI_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dsi", version, about = "Distributed speculative inference simulator and planner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm, offline (simulated clock) or online (real threads).
    Simulate(simulate::SimulateArgs),
    /// Pick a lookahead for an SP degree, or the SP a lookahead needs.
    Plan(analysis::PlanArgs),
    /// Estimate an acceptance rate or forward latencies from JSONL records.
    Estimate(analysis::EstimateArgs),
    /// Sweep drafter latency and acceptance rate, writing CSV and SVG heatmaps.
    Sweep(grids::SweepArgs),
    /// Report DSI-vs-SI speedups for target/drafter pairs.
    Pairs(grids::PairsArgs),
    /// Check that randomized online DSI runs reproduce non-SI output.
    VerifyLossless(verify::VerifyArgs),
}

/// Why a command failed, mapped onto the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Violation(String),
    AllFailed(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Violation(_) => 1,
            Failure::Usage(_) => 2,
            Failure::AllFailed(_) => 3,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

/// Worker count from `DSI_THREADS`, or the machine's parallelism.
pub fn default_threads() -> Result<usize, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::Usage(anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub(crate) fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let n = match threads {
        Some(n) => n,
        None => default_threads()?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| anyhow::anyhow!("cannot build thread pool: {e}"))?;
    Ok(pool.install(f))
}

pub(crate) fn out_path(dir: &std::path::Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Plan(a) => analysis::plan(a),
        Command::Estimate(a) => analysis::estimate(a),
        Command::Sweep(a) => grids::sweep(a),
        Command::Pairs(a) => grids::pairs(a),
        Command::VerifyLossless(a) => verify::run(a),
    }
}

pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::Violation(m) => eprintln!("violation: {m}"),
                Failure::AllFailed(m) => eprintln!("failed: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
