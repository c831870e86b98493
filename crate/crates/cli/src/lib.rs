//! Front end for `pesim-core`: config parsing, the four subcommands and
//! their output files. `main.rs` only maps arguments onto [`commands`].

pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;

use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("check failed: {0}")]
    Verdict(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Verdict(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<pesim_core::Error> for CliError {
    fn from(e: pesim_core::Error) -> Self {
        use pesim_core::Error as E;
        match e {
            E::Run(_) | E::SingularMatrix(_) | E::NonPositiveState { .. } | E::BoundaryFlux { .. } => {
                CliError::Solver(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}
