//! Command-line batch workflows: fit, simulate, and FDR-curve selection.

mod commands;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Empirical-Bayes variable selection for high-dimensional GLMs.
#[derive(Parser)]
#[command(name = "icmm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a sparse GLM by iterated conditional modes/medians.
    Fit(commands::FitArgs),
    /// Generate a simulation design (optionally run the full pipeline).
    Simulate(commands::SimulateArgs),
    /// Compute the FDR curve and select predictors at a target level.
    FdrCurve(commands::FdrCurveArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => commands::cmd_fit(&args),
        Command::Simulate(args) => commands::cmd_simulate(&args),
        Command::FdrCurve(args) => commands::cmd_fdr_curve(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
