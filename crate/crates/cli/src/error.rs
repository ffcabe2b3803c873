use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// An experiment ended with a FAIL or INVALIDATED verdict.
    pub const VERDICT: i32 = 1;
    /// Bad command line, unknown subcommand or missing input file.
    pub const USAGE: i32 = 2;
    /// Config schema or validation error.
    pub const SCHEMA: i32 = 3;
    pub const INTERNAL: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {}: {message}", path.display())]
    MissingFile { path: PathBuf, message: String },
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] chnu::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::MissingFile { .. } => exit::USAGE,
            CliError::Schema { .. } => exit::SCHEMA,
            CliError::Output { .. } | CliError::Core(_) | CliError::Internal(_) => exit::INTERNAL,
        }
    }
}
