use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("I/O error at line {line}: {source}")]
    IoAtLine {
        line: usize,
        #[source]
        source: io::Error,
    },

    #[error("invalid length constraint: {0}")]
    InvalidConstraint(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    /// No pattern satisfies the constraint, so nothing can be drawn.
    #[error("total weighted utility is zero: no pattern satisfies the constraint")]
    ZeroMass,

    #[error("binomial row {n} is outside the cached Pascal triangle (n_max = {n_max})")]
    PascalRange { n: usize, n_max: usize },

    #[error("position {position} is outside transaction of length {len}")]
    Position { position: usize, len: usize },

    #[error("enumeration needs {needed} subsets, above the cap of {cap}")]
    EnumerationCap { needed: u128, cap: u128 },

    #[error("source file {path} changed between passes: {reason}")]
    SourceChanged { path: PathBuf, reason: String },

    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("item {0} does not map to a profile edge")]
    UnmappedItem(String),

    #[error("invalid JSON document: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
