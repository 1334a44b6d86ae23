use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("non-finite coordinate")]
    NonFinite,

    #[error("zero-length trajectory (all points identical)")]
    ZeroLength,

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("collinear points: a fitted plane is undefined")]
    Collinear,

    #[error("non-finite cost at iteration {iteration}")]
    NonFiniteCost { iteration: usize },

    #[error("model format: {0}")]
    Format(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
