use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for a graph with {node_count} nodes")]
    NodeOutOfRange { index: usize, node_count: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("missing vector for neighbor {0}")]
    MissingNeighbor(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("{what}: gave up after {attempts} attempts")]
    ResampleCapExceeded { what: &'static str, attempts: usize },

    #[error("message {from}->{to} does not match the topology seen by node {node}")]
    TopologyMismatch { from: usize, to: usize, node: usize },

    #[error("reference block of node {0} has zero norm")]
    ZeroNormReference(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
