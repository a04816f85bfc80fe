use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A CSV or config row does not conform to its schema.
    #[error("{file}: row {row}: {message}")]
    Schema { file: PathBuf, row: usize, message: String },

    #[error("unknown reference: {0}")]
    Reference(String),

    #[error("topology error: {0}")]
    Topology(String),

    /// Input outside the mathematical domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("OD pair {od} is unreachable from {origin} to {destination}")]
    Unreachable {
        od: String,
        origin: String,
        destination: String,
    },

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("oracle refused: {0}")]
    OracleRefusal(String),

    #[error("solution is infeasible: {0}")]
    InfeasibleSolution(String),

    #[error("LP engine failure: {0}")]
    Lp(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(file: impl Into<PathBuf>, row: usize, message: impl Into<String>) -> Self {
        Error::Schema {
            file: file.into(),
            row,
            message: message.into(),
        }
    }
}
