//! Library side of the experiment CLI: configuration, file formats, and the
//! generate/design/evaluate/experiment pipeline.

pub mod config;
pub mod io;
pub mod pipeline;

use thiserror::Error;

/// CLI failure classes, mapped to exit codes by the binary: validation
/// errors exit 1, runtime/data errors exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}
