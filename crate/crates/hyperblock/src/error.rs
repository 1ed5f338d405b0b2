//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {id} out of range for {n} nodes")]
    OutOfRange { id: usize, n: usize },

    #[error("hyperedge has fewer than 2 distinct nodes ({got})")]
    TooSmall { got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("input contains no records")]
    EmptyInput,

    #[error("binomial coefficient overflows u64 (n={n}, k={k})")]
    Overflow { n: u64, k: u64 },

    #[error("invalid group configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} out of range ({count} multisets for Q={q}, m={m})")]
    IndexOutOfRange {
        index: u64,
        count: u64,
        q: usize,
        m: usize,
    },

    #[error("state space too large: Q^n = {size:.3e} exceeds {limit:.1e}")]
    TooLarge { size: f64, limit: f64 },

    #[error("tuple sums only factorized for m <= {max}, got m = {m}")]
    UnsupportedM { m: usize, max: usize },

    #[error("degenerate configuration: {0}")]
    DegenerateConfig(String),

    #[error("label sequences have different lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },

    #[error("parameter dimensions differ: {0}")]
    DimensionMismatch(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown scenario name {0:?}")]
    UnknownScenario(String),

    #[error("sampling budget exhausted: accepted {signal} signal and {noise} noise hyperedges of {target} requested")]
    BudgetExhausted {
        signal: usize,
        noise: usize,
        target: usize,
    },

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Invalid(String),
}
