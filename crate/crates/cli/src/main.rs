//! `mmm`: fit, predict, simulate, bootstrap and diagnose
//! many-to-many-to-many mediation models from the command line.
//!
//! Exit codes: 0 success, 2 input validation, 3 solver non-convergence,
//! 4 simulation cell failure.

mod commands;
mod error;
mod io;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "mmm",
    about = "Two-stage penalized mediation analysis for multivariate exposures, mediators and outcomes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the two-stage model from CSV data.
    Fit(commands::fit::FitArgs),
    /// Predict mediators and outcomes for new subjects.
    Predict(commands::predict::PredictArgs),
    /// Run the Monte Carlo simulation grid.
    Simulate(commands::simulate::SimulateArgs),
    /// Bootstrap the indirect-effect matrix.
    Bootstrap(commands::bootstrap::BootstrapArgs),
    /// Error-bound and irrepresentable-condition diagnostics.
    Diagnose(commands::diagnose::DiagnoseArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => commands::fit::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Bootstrap(args) => commands::bootstrap::run(args),
        Command::Diagnose(args) => commands::diagnose::run(args),
    };
    if let Err(e) = result {
        eprintln!("mmm: {e}");
        std::process::exit(e.exit_code());
    }
}
