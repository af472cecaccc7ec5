//! Configuration, case orchestration, model comparison, convergence studies
//! and file output.

pub mod compare;
pub mod config;
pub mod converge;
pub mod profiles;
pub mod run;

use std::path::Path;

use thiserror::Error;

use crate::error::{GeometryError, PostprocessError, SolverError};

pub use compare::{compare_models, ComparisonReport, PairMetrics, VariantResult};
pub use config::{load_config, ConfigError, GeometrySpec, RunConfig};
pub use converge::{convergence_from_config, convergence_study, ConvergenceRow, ConvergenceTable, PulseProblem};
pub use profiles::{geometry_table, write_profiles};
pub use run::{postprocess_case, read_records, run_case, CaseReport, RecordEntry, Summary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

impl HarnessError {
    /// Process exit status: 2 configuration, 3 solver, 4 post-processing.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Geometry(_) => 2,
            HarnessError::Solver(_) | HarnessError::Io { .. } => 3,
            HarnessError::Postprocess(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, reason: impl ToString) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            reason: reason.to_string(),
        }
    }
}

/// Writes `text` to `path`, creating parent directories.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::io(path, e))?;
    write_file(path, text.as_bytes())
}
