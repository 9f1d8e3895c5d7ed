use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("edge ({u}, {v}) listed with conflicting weights {w1} and {w2}")]
    ConflictingEdge { u: usize, v: usize, w1: f64, w2: f64 },

    #[error("node {0} has no neighbours")]
    IsolatedNode(usize),

    #[error("node {0} has zero weighted degree")]
    ZeroDegree(usize),

    #[error("invalid edge weight {0}")]
    InvalidWeight(f64),

    #[error("edge ({0}, {1}) does not exist")]
    MissingEdge(usize, usize),

    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("graph has {n} nodes, above the dense oracle limit of {limit}")]
    OracleLimit { n: usize, limit: usize },

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("generator gave up after {0} attempts to avoid isolated nodes")]
    RetriesExhausted(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
