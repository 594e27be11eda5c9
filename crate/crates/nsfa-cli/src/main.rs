//! Command-line front end for sparse factor analysis with an inferred
//! factor count. See each subcommand's help for details.

mod commands;
mod config;
mod manifest;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "nsfa",
    version,
    about = "Sparse Gaussian factor analysis with an inferred factor count"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a data matrix; writes traces, samples, and metrics.
    Run(commands::run::RunArgs),
    /// Generate synthetic data with known sparse structure.
    Simulate(commands::simulate::SimulateArgs),
    /// Draw support matrices from the Indian buffet process prior.
    #[command(name = "ibp-draw")]
    IbpDraw(commands::ibp_draw::IbpDrawArgs),
    /// Score estimated loadings against the generating truth.
    Metrics(commands::metrics::MetricsArgs),
    /// Measure per-sweep cost along a size ladder.
    Timing(commands::timing::TimingArgs),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => commands::run::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::IbpDraw(args) => commands::ibp_draw::run(args),
        Command::Metrics(args) => commands::metrics::run(args),
        Command::Timing(args) => commands::timing::run(args),
    }
}
