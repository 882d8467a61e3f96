use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pbradmm::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Diverged(String),
    #[error("equivalence check failed: max deviation {deviation:e} exceeds {tol:e}")]
    Equivalence { deviation: f64, tol: f64 },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use pbradmm::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidParameter(_) | E::InvalidGraph(_) | E::ResampleCapExceeded { .. }) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
            CliError::Diverged(_) => 3,
            CliError::Equivalence { .. } => 4,
        }
    }
}
