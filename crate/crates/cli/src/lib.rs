//! Experiment runner behind the `contractlab` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv;
mod run;

pub use config::{ConfigError, Mode, RunConfig};
pub use run::{run, run_with_config, Overrides};

use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Validation(String),

    #[error("solver failed: {0}")]
    Solver(#[from] contractlab_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        use contractlab_core::Error as E;
        match self {
            RunError::Validation(_) => 2,
            RunError::Solver(E::Domain(_) | E::InvalidParams(_) | E::Configuration(_)) => 2,
            RunError::Solver(_) => 3,
            RunError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| RunError::Io { path, source }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Validation(e.0)
    }
}
