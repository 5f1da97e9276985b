//! Command-line front end over the experiment harness.
//!
//! Exit codes: 0 on success, 2 when a bound whose constants are exactly
//! known is violated, 1 on any other failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dadam::harness::{self, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(
    name = "dadam",
    version,
    about = "Consensus-based distributed adaptive gradient simulator",
    long_about = "Runs networks of gossip-coupled adaptive gradient agents from plain-text \
                  configs, logs per-round metrics to CSV, and checks the recorded runs \
                  against their theoretical guarantees."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one config: writes metrics.csv, checkpoints.csv, and one
    /// report_*.txt per evaluated bound.
    Run(SingleArgs),
    /// Execute several configs sharing one horizon and join their loss and
    /// regret columns into compare.csv.
    Compare(CompareArgs),
    /// Rerun one config across its [sweep] axis and write per-cell metrics
    /// plus sweep_summary.csv.
    Sweep(SingleArgs),
    /// Execute one config and write only the bound report files.
    Bounds(SingleArgs),
}

#[derive(Args)]
struct SingleArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config and DADAM_OUT_DIR).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Suppress progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Experiment config file; repeat the flag for each run (two or more).
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Master seed override applied to every config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the configs and DADAM_OUT_DIR).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Suppress progress lines.
    #[arg(long)]
    quiet: bool,
}

fn load(path: &Path, seed: Option<u64>, quiet: bool) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if quiet {
        cfg.quiet = true;
    }
    Ok(cfg)
}

/// Returns whether a hard bound violation occurred.
fn dispatch(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Run(a) => {
            let cfg = load(&a.config, a.seed, a.quiet)?;
            let out = harness::resolve_out_dir(a.out_dir.as_deref(), &cfg);
            Ok(harness::run(&cfg, &out)?.executed.hard_violation())
        }
        Command::Bounds(a) => {
            let cfg = load(&a.config, a.seed, a.quiet)?;
            let out = harness::resolve_out_dir(a.out_dir.as_deref(), &cfg);
            Ok(harness::bounds(&cfg, &out)?.executed.hard_violation())
        }
        Command::Sweep(a) => {
            let cfg = load(&a.config, a.seed, a.quiet)?;
            let out = harness::resolve_out_dir(a.out_dir.as_deref(), &cfg);
            Ok(harness::sweep(&cfg, &out)?.hard_violation)
        }
        Command::Compare(a) => {
            let mut cfgs = Vec::with_capacity(a.config.len());
            for path in &a.config {
                cfgs.push(load(path, a.seed, a.quiet)?);
            }
            let Some(first) = cfgs.first() else {
                return Err(HarnessError::TooFewConfigs);
            };
            let out = harness::resolve_out_dir(a.out_dir.as_deref(), first);
            Ok(harness::compare(&cfgs, &out)?.hard_violation)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("bound violated with exactly-known constants");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
