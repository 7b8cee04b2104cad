//! `emsim` — experiment runner for the energy-harvesting node simulator.

mod commands;
mod config;
mod output;
mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::CmdError;

#[derive(Parser)]
#[command(
    name = "emsim",
    version,
    about = "Discrete-time simulation and analysis of energy-harvesting sensor nodes with finite battery and data buffer"
)]
pub struct Cli {
    /// Override the seed from the spec file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for replications and sweep cells (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for CSV and plot-script outputs.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run one configuration and report long-run metrics with confidence
    /// intervals.
    Simulate { config: PathBuf },
    /// Run every (policy, axis value) cell of a parameter sweep and emit
    /// a CSV plus a gnuplot script.
    Sweep { spec: PathBuf },
    /// Emit the discharge/loss exponent tradeoff curve and simulate
    /// chosen operating points.
    Tradeoff { spec: PathBuf },
    /// Cross-check the simulator against the exact finite-chain oracle
    /// on an integer-valued configuration.
    Oracle { config: PathBuf },
    /// Estimate a process's mean and asymptotic variance by batch means.
    Stats { spec: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore the error if a pool already exists (e.g. under tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match commands::dispatch(&cli.command, &cli.out_dir, cli.seed) {
        Ok(()) => {}
        Err(CmdError::Config(e)) => {
            eprintln!("config error: {e:#}");
            std::process::exit(2);
        }
        Err(CmdError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
