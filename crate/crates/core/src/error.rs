use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("model construction error: {0}")]
    Construction(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model integrity error: {0}")]
    ModelIntegrity(String),

    #[error("solver environment error: {0}")]
    Environment(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("service infeasible: {0}")]
    ServiceInfeasible(String),

    #[error("invalid policy: {0}")]
    Policy(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
