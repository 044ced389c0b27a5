//! `stefan-spde`: configuration-driven front end for the stefan-spde library.
//!
//! Exit codes: 0 on success (including runs that blow up, which report
//! `blown_up=true`), 1 on validation errors, 2 on numerical failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Config, Overrides, DEFAULT_CONFIG};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<stefan_spde::Error> for CliError {
    fn from(e: stefan_spde::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io error: {e}"))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stefan-spde", version, about = "Reflected SPDEs with a shared moving boundary")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; the bundled default is used when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override `noise.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override `output.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Override any config key, e.g. `--set grid.nx=64`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the coupled system; writes trajectory.csv (and profiles.csv).
    Simulate,
    /// Solve one obstacle problem; writes obstacle.csv.
    Obstacle,
    /// Picard iteration on the grid; writes picard_report.json.
    PicardCheck,
    /// Ensemble Holder-exponent estimates; writes holder.json.
    Holder,
    /// Numerical heat-kernel estimates; writes kernel_check.json.
    KernelCheck,
    /// Fit drift/volatility tables from order flow; writes fit_lob.csv.
    FitLob,
    /// Simulate the price from a fitted table; writes price.csv.
    SimulatePrice,
    /// Print the bundled default configuration.
    DefaultConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::DefaultConfig = cli.command {
        print!("{DEFAULT_CONFIG}");
        return Ok(());
    }
    let (text, base) = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            (text, base)
        }
        None => (DEFAULT_CONFIG.to_string(), std::env::current_dir()?),
    };
    let overrides = Overrides { seed: cli.common.seed, out_dir: cli.common.out_dir, set: cli.common.set };
    let cfg = Config::load(&text, &base, &overrides)?;
    let ctx = commands::Context::new(cfg)?;
    match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Obstacle => commands::obstacle(&ctx),
        Command::PicardCheck => commands::picard_check(&ctx),
        Command::Holder => commands::holder(&ctx),
        Command::KernelCheck => commands::kernel_check(&ctx),
        Command::FitLob => commands::fit_lob(&ctx),
        Command::SimulatePrice => commands::simulate_price(&ctx),
        Command::DefaultConfig => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
