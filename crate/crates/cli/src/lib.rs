//! Configuration-driven runner for alternating Ritz minimisation: builds the
//! problem from a TOML file, runs it, and certifies the recorded run.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod output;

pub use commands::{cmd_certify, cmd_check, cmd_grid, cmd_run, Options};
pub use config::{Experiment, ExperimentConfig};
pub use error::CliError;

/// Sizes the global rayon pool from `NONLINRITZ_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NONLINRITZ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("NONLINRITZ_THREADS = '{v}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}
