use evolop_core::Error as CoreError;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// A failed command, classified by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0}")]
    Corrupt(String),

    #[error("ground truth not converged: {0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Simulation(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Corrupt(_) => 5,
            CliError::NotConverged(_) => 6,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Classifies an error raised while simulating a system.
    pub fn simulation(e: CoreError) -> Self {
        match e {
            CoreError::BlowUp { .. } | CoreError::NonFinite(_) => CliError::Simulation(e.to_string()),
            other => other.into(),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Config(format!("{}: {e}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidConfig(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::TrajectoryTooShort { .. }
            | CoreError::RankExceedsData { .. }
            | CoreError::Io(_)
            | CoreError::Json(_) => CliError::Config(msg),
            CoreError::BlowUp { .. } => CliError::Simulation(msg),
            CoreError::NonFinite(_)
            | CoreError::Singular(_)
            | CoreError::Cholesky { .. }
            | CoreError::Eigen(_)
            | CoreError::ModesUndefined
            | CoreError::NonRealForecast { .. } => CliError::Numerical(msg),
            CoreError::Corrupt(_) => CliError::Corrupt(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("invalid JSON: {e}"))
    }
}
