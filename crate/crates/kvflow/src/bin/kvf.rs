//! Thin command-line front end. All logic lives in the library; this
//! binary only parses arguments, loads the configuration and maps results
//! to exit codes: 0 success / threshold met, 2 configuration error,
//! 3 numerical failure or unmet threshold, 4 infeasible τ.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kvflow::config::RunConfig;
use kvflow::error::RunnerError;
use kvflow::runner;

#[derive(Parser)]
#[command(name = "kvf", about = "Lattice gradient flows for vortex functionals on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured flow and write trace/state/summary artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Finite-difference check of the analytic flow direction.
    CheckGradient {
        #[arg(long)]
        config: PathBuf,
    },
    /// Energy-identity residual at N and 2N with the observed order.
    EnergyIdentity {
        #[arg(long)]
        config: PathBuf,
    },
    /// Direct vs. metric flow discrepancy on a shared time grid.
    CompareFlows {
        #[arg(long)]
        config: PathBuf,
    },
    /// Stationary solver; writes u_star.bin and the residual history.
    KwSolve {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<RunConfig, RunnerError> {
    Ok(RunConfig::from_file(path)?)
}

fn dispatch(cmd: &Command) -> Result<bool, RunnerError> {
    match cmd {
        Command::Run { config } => {
            let report = runner::run(&load(config)?)?;
            println!("{}", serde_json::to_string_pretty(&report.summary).unwrap());
            Ok(true)
        }
        Command::CheckGradient { config } => {
            let r = runner::check_gradient(&load(config)?)?;
            println!(
                "max gradient deviation {:.3e} (tolerance {:.3e}): {}",
                r.max_deviation,
                r.tol,
                if r.pass { "pass" } else { "FAIL" }
            );
            Ok(r.pass)
        }
        Command::EnergyIdentity { config } => {
            let r = runner::energy_identity(&load(config)?)?;
            println!(
                "relative identity residual {:.3e} -> {:.3e}, observed order {:.3}: {}",
                r.rel_residual_coarse,
                r.rel_residual_fine,
                r.order,
                if r.pass { "pass" } else { "FAIL" }
            );
            Ok(r.pass)
        }
        Command::CompareFlows { config } => {
            let r = runner::compare_flows(&load(config)?)?;
            println!(
                "max relative flow discrepancy {:.3e} over {} rows (tolerance {:.3e}): {}",
                r.max_discrepancy,
                r.rows_compared,
                r.tol,
                if r.pass { "pass" } else { "FAIL" }
            );
            Ok(r.pass)
        }
        Command::KwSolve { config } => {
            let r = runner::kw_solve(&load(config)?)?;
            println!(
                "converged in {} iterations, residual {:.3e}, lambda_max {:.3e}",
                r.iterations, r.final_residual, r.lambda_max
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
