//! Command-line front end for the reverse stress testing engine.
//!
//! Five subcommands cover the workflow end to end: `fit` measures and
//! rescales scenario plausibility, `maxerst` finds the worst loss on a
//! plausibility budget, `loss` finds the most plausible scenario hitting a
//! P&L target, `sigma` estimates, repairs and stresses covariance matrices
//! from shock panels, and `sweep` tabulates VaR against the worst-case loss
//! across a correlation grid.
//!
//! Exit codes are part of the contract: 0 success, 2 bad input, 3 numeric
//! failure, 4 infeasible target, 5 self-audit failure. Every report is
//! byte-deterministic for fixed inputs and seed.

mod commands;
mod errors;
mod io;
mod report;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "erst", version, about = "Reverse stress testing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure a scenario's plausibility and rescale it onto a ceiling
    Fit(commands::FitArgs),
    /// Worst-case loss over a plausibility budget ellipsoid
    Maxerst(commands::MaxerstArgs),
    /// Most plausible scenario reaching a loss (or profit) target
    Loss(commands::LossArgs),
    /// Estimate, repair, stress and calibrate covariance matrices
    Sigma(commands::SigmaArgs),
    /// Tabulate VaR vs worst-case loss across a correlation grid
    Sweep(commands::SweepArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => commands::cmd_fit(args),
        Command::Maxerst(args) => commands::cmd_maxerst(args),
        Command::Loss(args) => commands::cmd_loss(args),
        Command::Sigma(args) => commands::cmd_sigma(args),
        Command::Sweep(args) => commands::cmd_sweep(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
