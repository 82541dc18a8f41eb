//! Command-line front end: experiment configs, solver runs, CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod expr;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("comparison failed")]
    ComparisonFailed,
}

impl CliError {
    /// 1 usage, 2 numerical failure, 3 comparison fail.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::ComparisonFailed => 3,
        }
    }
}

impl From<fkwalk_core::Error> for CliError {
    fn from(e: fkwalk_core::Error) -> Self {
        match e {
            fkwalk_core::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}
