use thiserror::Error;

/// Errors raised by graph construction, spectral analysis and the optimizers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("digraph is not strongly connected")]
    NotStronglyConnected,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not a column-stochastic matrix: {0}")]
    NotColumnStochastic(String),

    #[error("{what} did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("entry {index} is not strictly positive ({value:e})")]
    NonPositiveEntry { index: usize, value: f64 },

    #[error("weights must sum to {expected}, got {got}")]
    InvalidWeightSum { expected: f64, got: f64 },

    #[error("push-sum weight at node {node} is zero at iteration {iter}")]
    ZeroWeight { node: usize, iter: usize },

    #[error("run diverged at iteration {iter} (|x|_F = {norm:e})")]
    Diverged { iter: usize, norm: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
