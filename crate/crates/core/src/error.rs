//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by auction, selection, training, and harness operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exact enumeration would exceed its configured bound.
    ///
    /// Operations fail loudly instead of silently switching semantics; the
    /// message names the Monte Carlo path to use instead when one exists.
    #[error("state space too large: {0}")]
    TooLarge(String),

    /// An instance is degenerate for the requested computation
    /// (e.g. a zero-welfare denominator in a metric ratio).
    #[error("degenerate instance: {0}")]
    Degenerate(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// A model file failed to parse or had inconsistent dimensions.
    #[error("model format: {0}")]
    ModelFormat(String),

    /// An auction log line failed validation.
    #[error("auction log line {line}: {msg}")]
    LogParse { line: usize, msg: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
