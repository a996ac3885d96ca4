//! SoftMax-over-simplex experiments comparing Frank-Wolfe with the inexact
//! contracting Newton method.

pub mod experiment;
pub mod instance;
pub mod reference;

use std::path::PathBuf;

use thiserror::Error;

pub use experiment::{run_experiment, run_sweep, ExperimentConfig, ExperimentReport, MethodKind, MethodSummary, OutputFormat};
pub use instance::{generate_instance, SoftMaxInstance};
pub use reference::{reference_solution, Reference};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{method} run failed at k = {k}: {source}")]
    Run {
        method: MethodKind,
        k: usize,
        #[source]
        source: contracting::Error,
    },

    #[error(transparent)]
    Core(#[from] contracting::Error),
}

impl BenchError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            _ => 1,
        }
    }
}
