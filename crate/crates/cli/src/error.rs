use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Engine(#[from] blockgraph::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use blockgraph::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Invariant(_) => 4,
            CliError::Engine(e) => match e {
                E::InvalidArgument(_) | E::Range(_) => 2,
                E::Io { .. } | E::Parse { .. } | E::Format(_) => 3,
                _ => 4,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
