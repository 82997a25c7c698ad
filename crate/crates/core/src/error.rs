use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pump H-Q curve does not intersect the demand curve (speed {speed:.4}, static head {static_head:.4} m)")]
    NoIntersection { speed: f64, static_head: f64 },

    #[error("pump operating point is not unique (speed {speed:.4}, static head {static_head:.4} m); check the H-Q curve")]
    NonUniqueRoot { speed: f64, static_head: f64 },

    #[error("simulation produced a non-finite level in branch {branch}")]
    NonFiniteState { branch: usize },

    #[error("sequence of length {len} is too short for depth {depth}")]
    TooShort { len: usize, depth: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("LQ reconstruction check failed: {0}")]
    ReconstructionFailure(String),

    #[error("optimization infeasible{}: {detail}", branch.map(|b| format!(" (branch {b})")).unwrap_or_default())]
    Infeasible { branch: Option<usize>, detail: String },

    #[error("kernel matrix is singular even after jitter {jitter:e}")]
    SingularKernel { jitter: f64 },

    #[error("closed-loop simulation failed: {0}")]
    SimulationFailed(String),

    #[error("excitation data collection failed at step {step}: branch {branch} left the output band by {excess:.3} m")]
    CollectionFailed { step: usize, branch: usize, excess: f64 },

    #[error("trajectory of length {len} is shorter than the evaluation window {needed}")]
    WindowTooShort { len: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
