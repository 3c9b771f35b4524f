//! `mrlop`: run controller experiments, aggregate their logs, benchmark the solver
//! and generate synthetic input data.

mod commands;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Why a command stopped.
pub enum Failure {
    /// Bad configuration or data; exit code 2.
    Input(anyhow::Error),
    /// Some runs failed (failed, total); exit code 1.
    Runs(usize, usize),
}

#[derive(Parser)]
#[command(name = "mrlop", version, about = "Multi-resolution receding-horizon controller experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, seed) pair of an experiment spec.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the spec).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seeds such as `0,1,2` or `0..10` (overrides the spec).
        #[arg(long)]
        seeds: Option<String>,
        /// Print the effective configuration and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Aggregate run logs under a directory into cost, evaluation and metric tables.
    Report {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solver sanity benchmark.
    Bench {
        #[arg(default_value = "sphere")]
        suite: String,
        #[arg(long, default_value = "0..20")]
        seeds: String,
        #[arg(long, default_value_t = 10)]
        dimension: usize,
    },
    /// Write synthetic price and weather CSV files.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 367)]
        days: usize,
        #[arg(long, default_value_t = 850.0)]
        peak_ghi: f64,
        /// Enables day-to-day irradiance jitter with this seed.
        #[arg(long)]
        jitter_seed: Option<u64>,
    },
}

fn init_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("MRLOP_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Input(anyhow::anyhow!("MRLOP_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(e.into()))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            dry_run,
        } => {
            let seeds = seeds
                .map(|s| experiment::parse_seeds(&s))
                .transpose()
                .map_err(Failure::Input)?;
            experiment::cmd_run(&config, out, seeds, dry_run)
        }
        Command::Report { dir, out } => commands::cmd_report(&dir, out),
        Command::Bench {
            suite,
            seeds,
            dimension,
        } => {
            let seeds = experiment::parse_seeds(&seeds).map_err(Failure::Input)?;
            commands::cmd_bench(&suite, &seeds, dimension)
        }
        Command::SynthData {
            out,
            days,
            peak_ghi,
            jitter_seed,
        } => commands::cmd_synth_data(&out, days, peak_ghi, jitter_seed),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runs(failed, total)) => {
            eprintln!("error: {failed} of {total} runs failed");
            ExitCode::from(1)
        }
    }
}
