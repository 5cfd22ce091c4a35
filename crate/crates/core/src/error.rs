use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("potential is not coercive: {0}")]
    NonCoercive(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("certificate failed: {0}")]
    Certificate(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Same failure with the pipeline stage prefixed to its message.
    pub fn in_stage(self, stage: &str) -> Error {
        let tag = |m: String| format!("[{stage}] {m}");
        match self {
            Error::GridMismatch(m) => Error::GridMismatch(tag(m)),
            Error::InvalidGrid(m) => Error::InvalidGrid(tag(m)),
            Error::NonFinite(m) => Error::NonFinite(tag(m)),
            Error::InvalidInput(m) => Error::InvalidInput(tag(m)),
            Error::Hypothesis(m) => Error::Hypothesis(tag(m)),
            Error::NonCoercive(m) => Error::NonCoercive(tag(m)),
            Error::NonConvergence(m) => Error::NonConvergence(tag(m)),
            Error::Certificate(m) => Error::Certificate(tag(m)),
            Error::Config(m) => Error::Config(tag(m)),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), tag(e.to_string()))),
        }
    }

    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis(_) | Error::NonCoercive(_) => 2,
            Error::NonConvergence(_) => 3,
            Error::Certificate(_) => 4,
            _ => 1,
        }
    }
}
