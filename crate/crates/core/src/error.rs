use thiserror::Error;

use crate::dsl::ParseDiagnostic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{what} index {index} out of range 1..={max}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("non-finite value {value} while evaluating {what} at {at}")]
    NonFinite {
        what: String,
        at: String,
        value: f64,
    },

    /// Domain violation inside an expression (log of a non-positive number, ...).
    #[error("domain error in `{node}`: {message} (argument = {value})")]
    Domain {
        node: String,
        value: f64,
        message: String,
    },

    #[error("parse error: {0}")]
    Parse(#[from] ParseDiagnostic),

    #[error(
        "singular Jacobian at node {node} (pivot {pivot:e}); the Legendre condition \
         may be violated or degenerate there"
    )]
    SingularJacobian { node: usize, pivot: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations; residual history {history:?}")]
    NoConvergence {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("assembled Jacobi matrix is not symmetric (asymmetry {asymmetry:e} at node {node}); the Lagrangian is probably not C2")]
    NonSymmetric { node: usize, asymmetry: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("problem file error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
