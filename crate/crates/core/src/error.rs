use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every module in the crate.
///
/// The CLI maps these onto process exit codes, so the split between
/// configuration, degenerate data and I/O matters.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or test parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Tuning constants do not admit a window configuration for this grid size.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Input observations are malformed (non-finite, too short).
    #[error("invalid data: {0}")]
    Data(String),

    /// The data are well formed but carry no variation to studentize by.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("block index {index} out of range (0..{count})")]
    Index { index: usize, count: usize },

    /// Input files that cannot be parsed at all.
    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
