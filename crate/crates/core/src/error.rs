use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("routing error: {0}")]
    Routing(String),

    #[error("bundle error: {0}")]
    Bundle(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] crate::nets::checkpoint::CheckpointError),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("attitude reached the pitch singularity")]
    Singular,
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::MissingFile(_) => "missing-file",
            Error::Io { .. } => "io",
            Error::Routing(_) => "routing",
            Error::Bundle(_) => "bundle",
            Error::Checkpoint(_) => "checkpoint",
            Error::Dimension { .. } => "dimension",
            Error::NonFinite(_) => "non-finite",
            Error::Singular => "singular",
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension { .. } => 3,
            Error::MissingFile(_) => 4,
            Error::Io { .. } => 5,
            Error::Routing(_) => 6,
            Error::Bundle(_) => 7,
            Error::Checkpoint(_) => 8,
            Error::NonFinite(_) | Error::Singular => 9,
        }
    }
}
