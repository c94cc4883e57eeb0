use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs that must line up (per-subchannel lists, alphabets) do not.
    #[error("shape error: {0}")]
    Shape(String),

    /// A power allocation violates its budget.
    #[error("infeasible allocation: {0}")]
    Infeasible(String),

    /// A fading state whose S-D or S-E gain is zero cannot be normalized.
    #[error("degenerate fading state: {0}")]
    DegenerateState(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A distribution fails the factorization its relay mode requires.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Config or fixture text that could not be understood.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
