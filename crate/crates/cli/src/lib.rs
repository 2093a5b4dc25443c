//! Config-driven experiment runner for the collisional-cooling simulator.
//!
//! A run is one TOML file naming a recipe. [`config::load_config_file`]
//! resolves it, [`recipes::run_experiment`] executes it and writes CSV
//! tables plus a `metadata.toml` into the output directory.

use std::path::PathBuf;

pub mod config;
pub mod output;
pub mod recipes;

pub use config::{Diagnostic, ExperimentConfig};
pub use recipes::{run_experiment, Recipe, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config:\n{}", render(.0))]
    Config(Vec<Diagnostic>),

    #[error(transparent)]
    Core(#[from] coolsim_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("output check failed: {0}")]
    Bounds(String),

    #[error("run aborted: {0}")]
    Aborted(String),

    #[error("{} of {total} points failed:\n{}", failures.len(), render_failures(failures))]
    Partial { total: usize, failures: Vec<(String, String)> },
}

impl RunError {
    /// Process exit code: 2 for config errors, 3 for partially failed
    /// sweeps, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Partial { .. } => 3,
            _ => 1,
        }
    }
}

fn render(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

fn render_failures(f: &[(String, String)]) -> String {
    f.iter().map(|(k, e)| format!("  {k}: {e}")).collect::<Vec<_>>().join("\n")
}

/// Worker count from `COOLSIM_WORKERS`, else the number of available cores.
pub fn worker_count() -> usize {
    std::env::var("COOLSIM_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w: &usize| w >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
