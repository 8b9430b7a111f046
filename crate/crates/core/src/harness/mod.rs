//! Experiment driver: configuration, resumable sweeps, persistence and the
//! integrator-error probe on the Toda lattice.

pub mod checkpoint;
pub mod config;
pub mod output;
pub mod probe;
pub mod report;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::fit::FitError;
use crate::lyapunov::LyapError;
use crate::model::ModelError;
use crate::theory::TheoryError;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, MemberCheckpoint};
pub use config::{ExperimentConfig, FloorCheck, RunSpec, TMaxRule};
pub use output::{run_dir, RunRecord};
pub use probe::{toda_check, TodaCheckConfig, TodaCheckReport};
pub use report::{collect_records, fit_records, theory_table, FitRow};
pub use sweep::{execute_runs, RunStatus, SweepOptions, SweepReport};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "FPU_LYAP_OUT";
pub const DEFAULT_OUT: &str = "results";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lyap(#[from] LyapError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

impl HarnessError {
    /// Errors detected before any integration starts.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::Model(_)
                | HarnessError::Theory(TheoryError::NotApplicable(_) | TheoryError::Input(_))
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}

/// Output root from the environment, falling back to `results`.
pub fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}
