use std::path::{Path, PathBuf};

use ensemble_minimax::Error as CoreError;
use serde_json::json;
use thiserror::Error;

/// Failures surfaced by the command line, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{message}")]
    Validation { kind: &'static str, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Certification ran but some check exceeded its tolerance.
    #[error("certification failed")]
    CertificationFailed,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn parse(path: &Path, message: impl Into<String>) -> Self {
        Self::Parse {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::Validation {
            kind: "invalid_argument",
            message: message.into(),
        }
    }

    /// Process exit code: 2 domain/validation, 3 parse/dimension, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(CoreError::Dimension { .. }) | Self::Parse { .. } | Self::Dimension(_) => 3,
            Self::Core(_) | Self::Validation { .. } => 2,
            Self::Io { .. } => 4,
            Self::CertificationFailed => 1,
        }
    }

    /// Machine-readable error tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(e) => match e {
                CoreError::Dimension { .. } => "dimension_mismatch",
                CoreError::InfeasibleConstraint { .. } => "infeasible_constraint",
                CoreError::DegenerateBound { .. } => "degenerate_bound",
                CoreError::DegenerateAbstain { .. } => "degenerate_abstain",
                CoreError::InvalidCost { .. } => "invalid_cost",
                CoreError::InfiniteDivergence(_) => "support_violation",
                CoreError::Infeasible { .. } => "infeasible",
                CoreError::InvalidInput(_) => "invalid_input",
            },
            Self::Parse { .. } => "parse_error",
            Self::Dimension(_) => "dimension_mismatch",
            Self::Validation { kind, .. } => kind,
            Self::Io { .. } => "io_error",
            Self::CertificationFailed => "certification_failed",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.kind(), "message": self.to_string() })
    }
}
