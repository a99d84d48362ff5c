use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid probability space: {0}")]
    InvalidSpace(String),

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid process: {0}")]
    InvalidProcess(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("market not viable at node {node}: {reason}")]
    NotViable { node: usize, reason: String },

    #[error(
        "optimizer did not converge after {iterations} iterations (certificate {certificate:e})"
    )]
    NoConvergence { iterations: usize, certificate: f64 },

    #[error("axiom violation: {0}")]
    AxiomViolation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
