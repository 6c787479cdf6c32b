use thiserror::Error;

/// Errors produced across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("Blahut-Arimoto did not converge within {iterations} iterations (gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("blocklength exhausted: {requested} symbols requested, {remaining} remaining")]
    BlocklengthExhausted { requested: usize, remaining: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed codebook file: {0}")]
    Codebook(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
