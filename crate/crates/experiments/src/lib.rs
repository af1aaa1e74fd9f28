//! Experiment front end for the `mtem` binary: configuration parsing,
//! problem setup, condition reports and error-ladder output.

pub mod app;
pub mod config;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod setup;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiment::{check_conditions, run_experiment, ConditionsReport, RunOutcome};
pub use setup::{derive_constants, Setup};

/// Runs `f` on a dedicated pool of `jobs` threads, or on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::config("--jobs must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::config(format!("thread pool: {e}"))),
    }
}
