use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit code for usage and input errors.
pub const EXIT_USAGE: i32 = 1;
/// Process exit code when a runtime invariant check fails.
pub const EXIT_INVARIANT: i32 = 2;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid shape: {0}")]
    InvalidShape(String),

    #[error("index ({i}, {j}) out of range for {nx}x{ny} grid")]
    IndexOutOfRange { i: usize, j: usize, nx: usize, ny: usize },

    #[error("speed at node {index} must be positive and finite, got {value}")]
    InvalidSpeed { index: usize, value: f64 },

    #[error("invalid seed ({i}, {j}): {reason}")]
    InvalidSeed { i: usize, j: usize, reason: String },

    #[error("seed set is empty, nothing to march from")]
    EmptySeeds,

    #[error("both stencil inputs are infinite, no information to update from")]
    NoInformation,

    #[error("negative radicand {0} in quadratic update (stencil outside the two-sided regime)")]
    NegativeRadicand(f64),

    #[error("cannot bin an infinite arrival time")]
    InfiniteArrival,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvariantViolation(_) => EXIT_INVARIANT,
            _ => EXIT_USAGE,
        }
    }
}
