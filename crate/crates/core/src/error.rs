use thiserror::Error;

#[derive(Debug, Error)]
pub enum KitError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("sum-of-exponentials build failed: {0}")]
    SoeBuild(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KitError>;
