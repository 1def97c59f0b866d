use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// One entry per problem found in the config or the arguments.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    /// At least one seed aborted; outputs for the others were written.
    #[error("{failed} of {total} seeds aborted: {first}")]
    Numeric { failed: usize, total: usize, first: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] staf_core::StafError),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(vec![msg.into()])
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io { .. } | CliError::Core(_) => 1,
        }
    }
}
