//! `gimvi-dyn`: validate instances, synthesize parameters, run the
//! dynamics, and export CSV/JSON for plotting.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "gimvi-dyn", version, about = "Third-order dynamics for GIMVI problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON or TOML run configuration (`.toml` extension selects TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Output directory for CSV and JSON files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check instance invariants and print its constants.
    Validate,
    /// Run the configured dynamics and fit its rate.
    Solve,
    /// Run first-, second- and third-order systems side by side.
    Compare,
    /// Synthesize parameters for every region and check them.
    Tune,
    /// Run every property audit and report worst slacks.
    Audit,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let overrides = Overrides {
        seed: cli.seed,
        dt: cli.dt,
        horizon: cli.horizon,
        out: cli.out,
    };
    let result = RunConfig::load(cli.config.as_deref(), &overrides).and_then(|cfg| match cli.command {
        Command::Validate => commands::validate(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Compare => commands::compare(&cfg),
        Command::Tune => commands::tune(&cfg),
        Command::Audit => commands::audit(&cfg),
    });
    let failure = match result {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.report).expect("reports serialize")
            );
            outcome.failure
        }
        Err(failure) => Some(failure),
    };
    match failure {
        None => ExitCode::SUCCESS,
        Some(f) => {
            eprintln!("gimvi-dyn: {f}");
            ExitCode::from(f.code())
        }
    }
}
