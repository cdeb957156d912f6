use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimensions: cache size {cache_size} must satisfy 1 <= L < {n_contents}")]
    InvalidDimensions { n_contents: usize, cache_size: usize },

    #[error("state space too large: {states} states exceeds cap {cap}")]
    TooLarge { states: u128, cap: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("content {content} is already cached in state {state}")]
    ContentAlreadyCached { content: usize, state: usize },

    #[error("states {a} and {b} are not neighbors")]
    NotNeighbors { a: usize, b: usize },

    #[error("content {content} is not cached in state {state}")]
    NotCached { content: usize, state: usize },

    #[error("operation requires the {expected} rate model variant")]
    WrongVariant { expected: &'static str },

    #[error("total request rate is zero at t = {t}")]
    ZeroTotalRate { t: f64 },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("request index {index} out of bounds (trace length {len})")]
    OutOfBounds { index: usize, len: usize },

    #[error("LRU scheme requires a conditional recency table")]
    MissingLruTable,

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("recency window {w} is shorter than the cache size {cache_size}")]
    WindowTooShort { w: usize, cache_size: usize },

    #[error("popularity history of length {have} is too short (need {need})")]
    HistoryTooShort { have: usize, need: usize },

    #[error("enumeration of {count} allocations exceeds cap {cap}")]
    TooExpensive { count: u128, cap: u128 },

    #[error("probability {value} outside [0, 1]")]
    InvalidProbability { value: f64 },

    #[error("replacement probabilities for state {state}, content {content} sum to {sum} > 1")]
    RowSumExceedsOne { state: usize, content: usize, sum: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sequence length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("no feasible state distribution: {0}")]
    Infeasible(String),

    #[error("no convergence after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("operation not supported for scheme {0}")]
    UnsupportedScheme(&'static str),

    #[error("unknown content id {id} (catalog size {n_contents})")]
    UnknownContent { id: usize, n_contents: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
