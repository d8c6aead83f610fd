use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("population file {path}: row {row}: {msg}")]
    PopulationRow { path: String, row: usize, msg: String },

    #[error("population file {path}: {msg}")]
    PopulationFile { path: String, msg: String },

    #[error("level {level} is below the reachable minimum {minimum}")]
    InfeasibleLevel { level: f64, minimum: f64 },

    #[error("budget {budget} is below the leveling-up threshold {threshold}")]
    InfeasibleBudget { budget: f64, threshold: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
