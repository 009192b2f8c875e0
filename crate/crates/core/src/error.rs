use thiserror::Error;

/// Errors produced by the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index error: {0}")]
    Index(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("infeasible boundary: {0}")]
    InfeasibleBoundary(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("outside supported regime: {0}")]
    Regime(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible channel: {0}")]
    InfeasibleChannel(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity(_) => 3,
            Error::InfeasibleBoundary(_) | Error::InfeasibleChannel(_) => 4,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
