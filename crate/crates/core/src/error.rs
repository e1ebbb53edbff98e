use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum CoreError {
    /// An argument was outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A graph violated a structural precondition (e.g. a node with no neighbors).
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// A layer record is missing or inconsistent thickness data.
    #[error("incomplete layer: {0}")]
    IncompleteLayer(String),

    /// A record file entry could not be interpreted.
    #[error("malformed record: {0}")]
    MalformedRecord(String),

    /// Scattered-data geometry too degenerate to triangulate.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// NaN or infinity showed up where finite values are required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A caller-supplied closure broke its determinism contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Checkpoint or data file version is not one this build understands.
    #[error("version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    /// Checkpoint or data file is structurally damaged.
    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidInput(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        CoreError::Shape(msg.into())
    }
}
