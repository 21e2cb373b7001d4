//! Convergence studies, smearing sweeps, cost studies, diagnostics and plots
//! on top of the `bzdos` methods. The `bzdos` binary is a thin wrapper.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod plot;
pub mod reference;
pub mod study;
pub mod system;

pub use config::{ConfigError, MethodKind, StudySpec};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dos(#[from] bzdos::DosError),
    #[error(transparent)]
    System(#[from] bzdos::systems::SystemError),
    #[error(transparent)]
    Hr(#[from] bzdos::wannier::HrError),
    #[error("no reference available: {0}")]
    ReferenceMissing(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl StudyError {
    /// Configuration and input problems, as opposed to numerical failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            StudyError::Config(_) | StudyError::Hr(_) | StudyError::Io { .. } | StudyError::Csv { .. } | StudyError::Parse { .. }
        )
    }
}
