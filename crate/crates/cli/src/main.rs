use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use sternpath_cli::{configure_threads, run, CliError, CliResult, Experiment, Overrides, RunConfig};

/// Stern-Gerlach path-integral simulations.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
    /// Config file of `key = value` lines
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample count
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Evaluation time
    #[arg(long, global = true, allow_negative_numbers = true)]
    t: Option<f64>,
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Extra `key=value` setting, applied after the config file
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn execute(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let overrides = Overrides { out: cli.out, seed: cli.seed, n: cli.n, t: cli.t, bins: cli.bins, set: cli.set };
    let config = RunConfig::assemble(cli.experiment, cli.config.as_deref(), &overrides)?;
    let outcome = run(&config)?;
    println!("{}", outcome.summary);
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::try_parse() {
        Ok(cli) => execute(cli),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => Err(CliError::Parse(e.to_string().trim().to_string())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}
