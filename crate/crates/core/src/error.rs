use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("trajectory shorter than lag (length {len}, lag {lag})")]
    TrajectoryTooShort { len: usize, lag: usize },

    #[error("singular system; increase tikhonov ({0})")]
    Singular(String),

    #[error("cholesky factorization failed: {matrix} is not positive definite")]
    Cholesky { matrix: &'static str },

    #[error("rank exceeds data rank (requested {requested}, numerical rank {available})")]
    RankExceedsData { requested: usize, available: usize },

    #[error("eigen solver failed: {0}")]
    Eigen(String),

    #[error("modes undefined: restriction matrix is non-diagonalizable within tolerance")]
    ModesUndefined,

    #[error("forecast has imaginary residual {residual:e} above tolerance (norm {norm:e})")]
    NonRealForecast { residual: f64, norm: f64 },

    #[error("simulation blew up at step {step}")]
    BlowUp { step: usize },

    #[error("corrupt artifact: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
