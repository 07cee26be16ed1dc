//! Shared error type for the library.

use thiserror::Error;

/// Errors produced by estimation, testing and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched dimensions between operands (lengths, grids, ranks).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid configuration or parameter value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Not enough observations for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The self-normalization matrix is numerically singular; carries the
    /// estimated condition number (infinite when an eigenvalue is <= 0).
    #[error("degenerate self-normalizer (condition number {condition:.3e})")]
    DegenerateNormalizer { condition: f64 },

    /// A matrix that must be inverted is singular beyond repair.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Requested eigencomponents beyond the numerically reliable rank.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// Malformed input file; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// No tabulated quantiles for the requested null distribution.
    #[error("no quantile table for q={q}, epsilon={epsilon}; run `snfts tabulate` first")]
    MissingTable { q: usize, epsilon: f64 },

    /// Requested level outside the tabulated range.
    #[error("level {level} outside tabulated range [{lo}, {hi}]")]
    LevelOutOfRange { level: f64, lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
