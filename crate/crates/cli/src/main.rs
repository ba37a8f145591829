//! `cbp`: run condition-based production experiments from TOML files.

mod commands;
mod manifest;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cbp", version, about = "Condition-based production experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the control problem and write the value and policy grid.
    Solve(CommonArgs),
    /// Check the structural properties of the optimal policy.
    Structure(CommonArgs),
    /// Optimize the maintenance interval.
    Tactical(CommonArgs),
    /// Compare against the best static production rate.
    Baseline(CommonArgs),
    /// Estimate the regret of the certainty-equivalent policy.
    Simulate(CommonArgs),
    /// Solve a small fleet sharing one demand rate.
    Multi(CommonArgs),
    /// Run the baseline comparison over a parameter grid, with checkpoints.
    Sweep(CommonArgs),
}

/// Flags shared by every subcommand; each overrides the matching file key.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of actions in the production grid.
    #[arg(long)]
    pub actions: Option<usize>,
    /// Number of re-optimizations of the certainty-equivalent policy.
    #[arg(long = "n-opt")]
    pub n_opt: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Structure(a) => ("structure", a),
        Command::Tactical(a) => ("tactical", a),
        Command::Baseline(a) => ("baseline", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Multi(a) => ("multi", a),
        Command::Sweep(a) => ("sweep", a),
    };
    match commands::run(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
