//! Batch front end: simulate chain products, draw the eigensolver-free
//! radial surrogate, tabulate limiting laws, classify dimension families,
//! and cross-validate the two routes. Every subcommand is deterministic
//! under a fixed seed and config; see README.md for the artifact layout.

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rectprod_cli::config::{ClassifyArgs, CommonArgs};
use rectprod_cli::runs;

#[derive(Parser)]
#[command(
    name = "rectprod",
    version,
    about = "Products of rectangular complex Gaussian matrices and their limiting spectral laws"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate chain products, eigensolve, and emit scaled spectra
    Simulate(CommonArgs),
    /// Draw the Gamma-product radial surrogate, no eigensolver involved
    Oracle(CommonArgs),
    /// Tabulate a limiting law (F, F*, densities) over a grid
    Limit(CommonArgs),
    /// Probe a dimension family across sizes and classify its limit type
    Classify(ClassifyArgs),
    /// Cross-validate the eigenvalue route against the oracle route
    Gof(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => runs::simulate(args),
        Command::Oracle(args) => runs::oracle(args),
        Command::Limit(args) => runs::limit(args),
        Command::Classify(args) => runs::classify_family(args),
        Command::Gof(args) => runs::gof(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
