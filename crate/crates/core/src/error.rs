use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("state error: {0}")]
    State(String),
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure ({status}): {message}")]
    Solver { status: String, message: String },
    #[error("unsupported schema_version {found} (this build reads up to {supported})")]
    Version { found: u64, supported: u64 },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("partial result: {message}")]
    Partial { message: String, payload: Box<crate::robustness::OutlierSet> },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
