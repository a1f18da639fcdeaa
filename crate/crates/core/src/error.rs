use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::evaluation::EvalReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes. The CLI maps each one to its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Training,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),

    #[error("invalid label at row {row}: class {label} is outside [0, {classes})")]
    InvalidLabel {
        row: usize,
        label: i64,
        classes: usize,
    },

    #[error("{0}")]
    Load(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("{0}")]
    Training(String),

    #[error("benchmark aborted in run {run}: {source}")]
    BenchmarkAborted {
        run: usize,
        partial: Box<EvalReport>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn load(msg: impl Into<String>) -> Self {
        Error::Load(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Config,
            Error::InvalidLabel { .. }
            | Error::Load(_)
            | Error::Io { .. }
            | Error::Shape { .. } => ErrorCategory::Data,
            Error::Diverged { .. } | Error::Training(_) => ErrorCategory::Training,
            Error::BenchmarkAborted { source, .. } => source.category(),
        }
    }

    /// Stable machine-readable identifier, printed by the CLI before the message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "E_CONFIG",
            Error::InvalidLabel { .. } => "E_LABEL",
            Error::Load(_) => "E_LOAD",
            Error::Io { .. } => "E_IO",
            Error::Shape { .. } => "E_SHAPE",
            Error::Diverged { .. } => "E_DIVERGED",
            Error::Training(_) => "E_TRAINING",
            Error::BenchmarkAborted { source, .. } => source.code(),
        }
    }
}
