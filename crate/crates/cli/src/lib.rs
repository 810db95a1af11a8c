//! Batch front-end for the `sternpath` simulations.
//!
//! A run is one experiment driven by a [`RunConfig`]; it writes a JSON
//! report plus CSV tables into the output directory and yields a one-line
//! summary. Failures carry an exit status: 2 parse, 3 validation, 4 numeric.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Experiment, Overrides, RunConfig};
pub use error::{CliError, CliResult};
pub use run::{run, RunOutcome};

/// Environment variable capping the worker thread count.
pub const THREADS_VAR: &str = "SG_SIM_THREADS";

/// Sizes the global rayon pool from [`THREADS_VAR`] when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Parse(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("cannot size thread pool: {e}")))
}
