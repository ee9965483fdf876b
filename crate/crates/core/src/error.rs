use thiserror::Error;

/// Crate-wide error type.
///
/// Error payloads are reported as `f64` regardless of the working scalar;
/// they are display-only.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("domain error in `{subexpr}`: {message}")]
    Domain { subexpr: String, message: String },

    #[error("map leaves [0,1] at {count} node(s), first at x = {x}: value {value}")]
    MapRange { x: f64, value: f64, count: usize },

    #[error("point {x} lies outside [0,1]")]
    OutOfInterval { x: f64 },

    #[error("grid size mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("function must be strictly positive: {0}")]
    NotPositive(String),

    #[error("invalid word: {0}")]
    InvalidWord(String),

    #[error("orbit does not return to its start: |Z_n - x0| = {defect}")]
    NonReturningOrbit { defect: f64 },

    #[error("spectral iteration failed: {0}")]
    Spectral(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
