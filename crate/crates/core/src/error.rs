use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid code: {0}")]
    InvalidCode(String),

    #[error("cannot parse code spec {0:?}; expected e.g. \"RC[2,1]^5000\" or \"SPC[4,3]^2500\"")]
    ParseSpec(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid probability input: {0}")]
    InvalidProbability(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("block {0} is a termination block and must carry an all-zero message")]
    NonZeroTermination(usize),

    #[error("encoder already produced all {0} blocks of the frame")]
    FrameComplete(usize),

    #[error("target BER {0:e} cannot be bracketed by the union bound")]
    Unbracketable(f64),

    #[error("missing side information for layer {layer}, branch {branch}")]
    MissingSideInfo { layer: isize, branch: usize },

    #[error("results file {path} was produced by a different configuration (hash {found}, expected {expected})")]
    ConfigMismatch {
        path: String,
        found: String,
        expected: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
