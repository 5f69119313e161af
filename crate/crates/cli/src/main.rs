use std::path::PathBuf;
use std::process::ExitCode;

use beliefcal::exec::with_threads;
use beliefcal_cli::commands::{self, BeliefChoice, RowSelection};
use beliefcal_cli::{CliError, RunConfig};
use clap::{Parser, Subcommand};

/// Calibrate Bayesian credit-model beliefs against recourse cost and fit.
#[derive(Parser)]
#[command(name = "beliefcal", version)]
struct Cli {
    /// Worker threads for the sweep (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the grid and write cells.csv, pareto.csv, pareto.md and scatter.svg.
    Calibrate { config: PathBuf },
    /// Write flipset.csv with decisions and recourse actions at one belief.
    Recourse {
        config: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// all, all-denied, or indices such as 0,5-9.
        #[arg(long, default_value = "all-denied")]
        rows: RowSelection,
    },
    /// Check the config and the data without running the sweep.
    Validate { config: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let exec = commands::execution_for(cli.threads);
    match cli.command {
        Command::Calibrate { config } => {
            let resolved = RunConfig::load(&config)?;
            let s = with_threads(cli.threads, || commands::calibrate(&resolved, exec))?;
            println!(
                "cells={} retained={} frontier={} out={}",
                s.cells,
                s.retained,
                s.frontier,
                s.output_dir.display()
            );
        }
        Command::Recourse {
            config,
            sigma,
            lambda,
            beta,
            rows,
        } => {
            let resolved = RunConfig::load(&config)?;
            let choice = BeliefChoice {
                sigma,
                lambda,
                beta,
            };
            let (path, n) = with_threads(cli.threads, || {
                commands::recourse(&resolved, choice, &rows, exec)
            })?;
            println!("rows={n} out={}", path.display());
        }
        Command::Validate { config } => {
            let s = commands::validate(&config)?;
            println!("n={} d={} cells={}", s.n, s.d, s.cells);
            println!("actionable={}", s.actionable);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments");
            let err = CliError::Config(line.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.diagnostic());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
