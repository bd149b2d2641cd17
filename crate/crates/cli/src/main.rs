mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{CliError, ErrorRecord};

#[derive(Parser)]
#[command(name = "mmloc", version, about = "AOA/AOD/TOA localization experiments over LOS and single-bounce NLOS paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one observation and estimate the UE from it.
    Estimate(RunArgs),
    /// Monte-Carlo RMSE of the estimator next to the Cramer-Rao bound.
    Mc(RunArgs),
    /// Bound versus tied angular noise for every path subset.
    Sweep(RunArgs),
    /// Empirical CDF of the bound over a UE grid.
    Cdf(RunArgs),
    /// Bound fields over a UE grid and the map gain NoREM - REM.
    Field(RunArgs),
    /// Scatterer map estimated along a UE trajectory.
    Remmap(RunArgs),
    /// Check a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Serialize)]
struct ValidationReport<'a> {
    schema_version: u32,
    status: &'a str,
    problems: &'a [String],
}

fn run_experiment(args: &RunArgs, f: fn(&config::Resolved) -> Result<(), CliError>) -> Result<(), CliError> {
    let raw = config::load(&args.config)?;
    let problems = raw.problems();
    if !problems.is_empty() {
        return Err(CliError::Invalid(problems));
    }
    let resolved = raw.resolve(args.seed, args.output_dir.clone())?;
    mmloc::parallel::with_workers(args.workers, || f(&resolved))
}

fn validate(path: &std::path::Path) -> Result<bool, CliError> {
    let problems = match config::load(path) {
        Ok(raw) => raw.problems(),
        Err(CliError::Config(msg)) => vec![msg],
        Err(e) => return Err(e),
    };
    let status = if problems.is_empty() { "ok" } else { "invalid" };
    let report = ValidationReport { schema_version: commands::SCHEMA_VERSION, status, problems: &problems };
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(problems.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => run_experiment(a, commands::estimate_cmd),
        Command::Mc(a) => run_experiment(a, commands::mc_cmd),
        Command::Sweep(a) => run_experiment(a, commands::sweep_cmd),
        Command::Cdf(a) => run_experiment(a, commands::cdf_cmd),
        Command::Field(a) => run_experiment(a, commands::field_cmd),
        Command::Remmap(a) => run_experiment(a, commands::remmap_cmd),
        Command::Validate { config } => match validate(config) {
            Ok(true) => return ExitCode::SUCCESS,
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let problems = match &e {
                CliError::Invalid(p) => p.clone(),
                _ => Vec::new(),
            };
            let record = ErrorRecord {
                schema_version: commands::SCHEMA_VERSION,
                status: "error",
                kind: e.kind(),
                message: e.to_string(),
                problems: &problems,
            };
            let _ = writeln!(std::io::stderr(), "{}", serde_json::to_string(&record).expect("record serializes"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
