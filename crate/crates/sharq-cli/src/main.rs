//! `sharq` - analytical sweeps, policy optimization, and Monte Carlo
//! validation for opportunistic ARQ spectrum sharing.

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{RunOptions, RunOutput};
use scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "sharq",
    version,
    about = "Opportunistic ARQ spectrum sharing toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output path; defaults to the scenario's [output] path, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweep points (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Override the optimizer grid step.
    #[arg(long, global = true)]
    grid_step: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form outage/load/delay sweep.
    Analyze,
    /// Per-scheme transmit power comparison.
    PowerSweep,
    /// Optimal access policies per sweep point.
    Optimize,
    /// Slot-level Monte Carlo sweep.
    Simulate,
    /// Closed forms vs Monte Carlo at the 3-sigma criterion.
    Validate,
    /// Parse the scenario and print its canonical form.
    EchoConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let path = cli
        .scenario
        .as_deref()
        .context("--scenario <path> is required")?;
    let scenario = Scenario::from_path(path)?;
    let opts = RunOptions {
        jobs: cli.jobs,
        seed: cli.seed,
        grid_step: cli.grid_step,
    };
    let output = match cli.command {
        Command::Analyze => commands::run_analyze(&scenario, &opts)?,
        Command::PowerSweep => commands::run_power_sweep(&scenario, &opts)?,
        Command::Optimize => commands::run_optimize(&scenario, &opts)?,
        Command::Simulate => commands::run_simulate(&scenario, &opts)?,
        Command::Validate => commands::run_validate(&scenario, &opts)?,
        Command::EchoConfig => commands::run_echo_config(&scenario),
    };
    emit(cli, &scenario, &output)?;
    Ok(output.ok)
}

fn emit(cli: &Cli, scenario: &Scenario, output: &RunOutput) -> Result<()> {
    let target = cli
        .out
        .clone()
        .or_else(|| scenario.output.as_ref().map(|o| PathBuf::from(&o.path)));
    match target {
        Some(path) => std::fs::write(&path, &output.csv)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", output.csv),
    }
    Ok(())
}
