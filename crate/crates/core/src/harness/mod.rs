//! Experiment driver: run configuration, training runs, grid generation
//! and run comparison.

pub mod compare;
pub mod config;
pub mod run;

use thiserror::Error;

pub use compare::{compare, compare_records, final_mean, improvement, load_run, Comparison, MetricSummary, RunRecord, COMPARED_METRICS};
pub use config::{apply_override, parse_grid, FlowSource, NetworkSource, RunConfig, DESK_ENV_STEPS, RUN_CONFIG_FORMAT_VERSION};
pub use run::{gen_grid_files, git_describe, load_environment, run, write_metrics_csv, RunManifest, RunOutcome, MANIFEST_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid configuration or inputs; exit status 2.
    #[error("config error: {0}")]
    Config(String),
    /// Failure while running; exit status 1.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 1,
        }
    }
}
