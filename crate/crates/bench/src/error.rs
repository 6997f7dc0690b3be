use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] kronsense::Error),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// 1 for bad input, 2 for solver failures, 3 when an enumeration cap is hit.
    pub fn exit_code(&self) -> i32 {
        use kronsense::Error as E;
        match self {
            BenchError::Core(E::EnumerationCap { .. }) => 3,
            BenchError::Core(E::NonFinite { .. } | E::ZeroSignal(_) | E::MissingRicOrder { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
