use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is singular (pivot {index} is zero or not finite)")]
    Singular { index: usize },

    #[error("block '{block}' is not positive definite: pivot {pivot:.3e} at row {index}")]
    NotPositiveDefinite {
        block: String,
        index: usize,
        pivot: f64,
    },

    #[error("minres breakdown: {0}")]
    Breakdown(String),

    #[error("dense eigenvalue problem of size {size} exceeds the cap of {cap}")]
    DimensionCap { size: usize, cap: usize },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
