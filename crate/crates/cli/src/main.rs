//! `dipolar-sense`: bounds tables, variational grid runs and analysis tables
//! for joint field/gradient estimation on dipolar spin chains.

mod commands;
mod config;
mod filter;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use commands::{cmd_analyze, cmd_bounds, cmd_run, resolve_out};
use config::{ExperimentConfig, DEFAULT_CONFIG_TOML};
use filter::CellFilter;

#[derive(Parser)]
#[command(name = "dipolar-sense", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard-quantum-limit and simplex benchmark table.
    Bounds(Common),
    /// Optimize every (cell, seed) of the grid and write one record each.
    Run(Common),
    /// Saturation, tier, seed and motif tables from the records on disk.
    Analyze(Common),
    /// bounds, run and analyze in sequence.
    All(Common),
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` from the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, value_name = "INT")]
    jobs: Option<usize>,
    /// Restrict to matching runs, e.g. `L3,N5,T1` or `N4,N5,S204`.
    #[arg(long, value_name = "CELL-FILTER", default_value = "")]
    only: CellFilter,
    /// Reuse records already listed in the manifest.
    #[arg(long)]
    resume: bool,
}

fn init_pool(jobs: Option<usize>) -> Result<()> {
    let Some(jobs) = jobs else { return Ok(()) };
    if jobs == 0 {
        bail!("--jobs must be positive");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    #[cfg(not(feature = "parallel"))]
    if jobs > 1 {
        log::warn!("built without the `parallel` feature; --jobs {jobs} ignored");
    }
    Ok(())
}

fn execute(command: Command) -> Result<bool> {
    let (verb, args) = match command {
        Command::DefaultConfig => {
            print!("{DEFAULT_CONFIG_TOML}");
            return Ok(true);
        }
        Command::Bounds(a) => ("bounds", a),
        Command::Run(a) => ("run", a),
        Command::Analyze(a) => ("analyze", a),
        Command::All(a) => ("all", a),
    };
    init_pool(args.jobs)?;
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let out = resolve_out(&cfg, args.out.clone());
    let mut ok = true;
    if matches!(verb, "bounds" | "all") {
        cmd_bounds(&cfg, &out)?;
    }
    if matches!(verb, "run" | "all") {
        let s = cmd_run(&cfg, &out, &args.only, args.resume)?;
        log::info!(
            "run: {} requested, {} computed, {} reused, {} failed",
            s.requested,
            s.computed,
            s.reused,
            s.failed
        );
        ok &= s.ok();
    }
    if matches!(verb, "analyze" | "all") {
        let s = cmd_analyze(&cfg, &out, &args.only)?;
        log::info!(
            "analyze: {} records, {} runs absent, {} cells without records",
            s.records,
            s.absent,
            s.missing.len()
        );
        ok &= s.ok();
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("some requested runs did not complete");
            ExitCode::from(1)
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
