//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while building markets or solving over Π.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),

    #[error("malformed quote: {0}")]
    MalformedQuote(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("probability must lie strictly inside (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("invalid reference distribution: {0}")]
    InvalidReference(String),

    #[error("degenerate log-normal fit: distribution is a point mass (mu = {mu})")]
    DegenerateFit { mu: f64 },

    #[error(
        "denominator can reach {min_denominator:.3e} on the feasible set, below the \
         allowed minimum {required:.3e}; the ratio is unbounded or undefined"
    )]
    DegenerateDenominator { min_denominator: f64, required: f64 },

    #[error("the risk-neutral set is empty (market admits arbitrage)")]
    EmptySet,

    #[error("snapshot contains no usable quotes")]
    EmptyMarket,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}
