use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("invalid pose graph: {0}")]
    InvalidGraph(String),

    #[error("g2o parse error at line {line}: {msg}")]
    G2o { line: usize, msg: String },

    #[error("empty graph")]
    EmptyGraph,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("zero matrix has no stable rank")]
    ZeroMatrix,

    #[error("graph is disconnected")]
    Disconnected,

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
