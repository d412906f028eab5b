use std::path::PathBuf;

use fabric_core::FabricError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file is not well-formed JSON.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    /// Well-formed JSON that violates the scenario schema.
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("unknown component `{name}` at `{field}` (expected one of: {expected})")]
    UnknownComponent {
        field: String,
        name: String,
        expected: String,
    },

    /// The rollout stopped on a numerical failure.
    #[error("numerical abort: {0}")]
    Numerical(#[source] FabricError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for configuration and I/O problems, 3 for
    /// numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
