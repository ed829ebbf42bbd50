//! `ohs`: optimal holdout set sizing from the command line.
//!
//! Every subcommand reads files, writes its outputs into `--out` together
//! with a `manifest.json` of checksums, and exits 0 on success, 2 on bad
//! input or an infeasible problem, and 3 on a numerical failure. Errors are
//! reported on stderr as `error_kind=` and `error_message=` lines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod formats;
mod oracle;
mod output;

use clap::{Parser, Subcommand};
use commands::Context;
use error::{CliError, CliResult};
use ohs_core::cost::DEFAULT_GRID_SIZE;
use output::OutputDir;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "ohs",
    version,
    about = "Holdout set sizing for refitting deployed risk scores"
)]
struct Cli {
    /// Seed for every random draw in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory receiving the outputs and the manifest.
    #[arg(long, global = true, default_value = "ohs-out")]
    out: PathBuf,
    /// Number of evenly spaced sizes in curves and candidate sets.
    #[arg(long, global = true, default_value_t = DEFAULT_GRID_SIZE)]
    grid: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal holdout size for known cost parameters.
    Ohs(commands::OhsArgs),
    /// Fit a power-law k2 to observations and estimate the optimum with intervals.
    FitParametric(commands::FitArgs),
    /// Emulate the total cost with a Gaussian process and search by expected improvement.
    Emulate(commands::EmulateArgs),
    /// Run a simulation scenario.
    Simulate(commands::SimulateArgs),
    /// Check the shape conditions on a sampled k2 curve.
    Assumptions(commands::AssumptionsArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Ohs(_) => "ohs",
            Self::FitParametric(_) => "fit-parametric",
            Self::Emulate(_) => "emulate",
            Self::Simulate(_) => "simulate",
            Self::Assumptions(_) => "assumptions",
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let mut ctx = Context {
        seed: cli.seed,
        grid: cli.grid,
        out: OutputDir::create(&cli.out)?,
    };
    match &cli.command {
        Command::Ohs(a) => commands::run_ohs(a, &mut ctx)?,
        Command::FitParametric(a) => commands::run_fit(a, &mut ctx)?,
        Command::Emulate(a) => commands::run_emulate(a, &mut ctx)?,
        Command::Simulate(a) => commands::run_simulate(a, &mut ctx)?,
        Command::Assumptions(a) => commands::run_assumptions(a, &mut ctx)?,
    }
    let args = std::env::args().skip(1).collect();
    let manifest = ctx.out.finish(cli.command.name(), args, cli.seed)?;
    log::info!("{} artifacts in {}", manifest.artifacts.len(), manifest.out);
    Ok(())
}

fn report(e: &CliError) {
    eprintln!("ohs: {e}");
    eprintln!("error_kind={}", e.kind());
    eprintln!("error_message={}", e.to_string().replace('\n', " "));
    if let CliError::Parse { line, .. } = e {
        eprintln!("error_line={line}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("error_kind=usage");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
