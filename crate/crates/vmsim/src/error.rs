use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Experiment-level misconfiguration (infeasible fleet, short trace, bad config file).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// No free migration bandwidth on the host; the caller defers the migration.
    #[error("no free migration bandwidth")]
    NoBandwidth,

    /// Cost-function inputs that match none of the printed case conditions.
    #[error("migration cost inputs match no case condition")]
    UncoveredCostCase,
}
