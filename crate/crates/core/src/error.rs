use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate edge between vertices {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("vertex index {index} out of range for graph with {n} vertices")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("graph must have at least one vertex")]
    EmptyGraph,
    #[error("graph is not connected")]
    Disconnected,
    #[error("{n} vertices exceeds the exhaustive partition limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("partition leaves one side empty")]
    EmptySide,
    #[error("partition is over {got} vertices, graph has {expected}")]
    PartitionSize { expected: usize, got: usize },
    #[error("bad coupling shape: {0}")]
    BadShape(String),
    #[error("bad delay distribution: {0}")]
    BadDelay(String),
    #[error("model is not in potential form (requires zero lags and odd couplings)")]
    NotPotentialForm,
    #[error("asymmetric lag on edge {0}-{1}: {2} != {3}")]
    AsymmetricLag(usize, usize, f64, f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite state encountered at t = {0}")]
    NonFinite(f64),
    #[error("event count exceeded cap of {0}")]
    EventOverflow(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bad isotropy spec: {0}")]
    BadSpec(String),
    #[error("empty vertex set")]
    EmptySet,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("cluster experiments need N to be a positive multiple of 3, got {0}")]
    BadN(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures, as opposed to validation problems.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::EventOverflow(_))
    }
}
