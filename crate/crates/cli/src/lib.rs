//! Command-line front end for the drift detector: configuration, reports,
//! and the `run`, `bench` and `gen` commands.

pub mod commands;
pub mod config;
pub mod report;

/// Sizes the global rayon pool from `DRIFT_THREADS` when it is set.
pub fn init_threads() -> drift_core::Result<()> {
    let Ok(value) = std::env::var("DRIFT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| drift_core::DriftError::config("DRIFT_THREADS", format!("expected a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| drift_core::DriftError::config("DRIFT_THREADS", e.to_string()))
}
