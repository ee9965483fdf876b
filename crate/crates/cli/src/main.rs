//! Command-line frontend for the weighted-IFS transfer-operator toolkit.
//!
//! Exit codes: 0 success, 2 bad input or setup failure, 3 results written
//! but an iteration stopped above tolerance.

mod commands;
mod config;
mod report;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use holoifs::{DEFAULT_GRID_N, DEFAULT_SPECTRAL_MAX_ITER, DEFAULT_SPECTRAL_TOL};

use commands::Ctx;
use config::Config;

#[derive(Parser)]
#[command(
    name = "holoifs",
    version,
    about = "Transfer-operator toolkit for weighted iterated function systems on [0,1]"
)]
struct Cli {
    /// JSON run configuration (required).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports; created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Number of grid cells (even); overrides the config.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Power-iteration tolerance; overrides the config.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Simulation seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single inverse temperature for beta-sweep; overrides the config list.
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Leading eigenvalue, eigenfunction and dual eigenmeasure.
    Spectrum,
    /// Rescale the weights into a stochastic family and report the
    /// stationary measure.
    Normalize,
    /// Topological pressure: spectral value against the variational bound
    /// over the configured candidates.
    Pressure,
    /// Entropy of each candidate measure by both formulas.
    Entropy,
    /// PASS/FAIL defect battery for each candidate measure.
    Verify,
    /// Chaos-game sampling with Birkhoff averages against the stationary
    /// measure.
    Simulate,
    /// Holonomy, marginal-invariance, inequality and shift defects.
    Holonomy,
    /// Pressure as a function of the inverse temperature.
    BetaSweep,
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    let config_path = cli
        .config
        .context("missing --config <FILE>; every command needs a run configuration")?;
    let cfg = Config::load(&config_path)?;

    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;

    let ctx = Ctx {
        grid_n: cli.grid_n.or(cfg.grid_n).unwrap_or(DEFAULT_GRID_N),
        tol: cli.tol.or(cfg.tol).unwrap_or(DEFAULT_SPECTRAL_TOL),
        max_iter: cfg.max_iter.unwrap_or(DEFAULT_SPECTRAL_MAX_ITER),
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        beta: cli.beta,
        out: cli.out,
        cfg,
    };

    match cli.command {
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Normalize => commands::normalize(&ctx),
        Command::Pressure => commands::pressure(&ctx),
        Command::Entropy => commands::entropy(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Holonomy => commands::holonomy(&ctx),
        Command::BetaSweep => commands::sweep(&ctx),
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
