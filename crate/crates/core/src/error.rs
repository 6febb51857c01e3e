use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A tabulated series was asked for more coefficients than are known.
    #[error("requested index {requested} exceeds the tabulated horizon {horizon} for flux mu={mu}")]
    HorizonExceeded { mu: i8, requested: usize, horizon: usize },

    #[error("invalid flux class mu={0}; expected -1, 0 or 1")]
    InvalidFlux(i64),

    #[error("matrix ({a}, {b}; {c}, {d}) is not in SL2(Z): {reason}")]
    InvalidMatrix { a: i64, b: i64, c: i64, d: i64, reason: &'static str },

    #[error("domain error in {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    /// g_0 has a genuine pole at w = 0.
    #[error("pole of g_0 at w = 0")]
    Pole,

    #[error("24*n_mu = {0} is not an integer")]
    NonIntegralPhase(f64),

    #[error("numerical assertion failed: {0}")]
    Numerical(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cache i/o: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
