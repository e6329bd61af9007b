use thiserror::Error;

/// Errors produced by the repair toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported activation: {0}")]
    UnsupportedActivation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("layer {layer} out of range (network has {count} layers)")]
    LayerIndex { layer: usize, count: usize },

    #[error("simplex iteration limit of {0} pivots reached")]
    IterationLimit(usize),

    #[error("external solver unavailable: {0}")]
    SolverUnavailable(String),

    #[error("external solver protocol error: {0}")]
    SolverProtocol(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
