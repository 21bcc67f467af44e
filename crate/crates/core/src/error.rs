use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate time scale: {0}")]
    DegenerateTimeScale(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("infeasible constraint: {0}")]
    InfeasibleConstraint(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("invalid value: {0}")]
    Value(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn eval(msg: impl Into<String>) -> Self {
        Error::Eval(msg.into())
    }

    /// Process exit code for the command line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. } | Error::Parse { .. } | Error::Value(_) => 2,
            Error::InfeasibleConstraint(_) => 4,
            Error::Io(_) | Error::Usage(_) => 1,
            Error::DegenerateTimeScale(_)
            | Error::Domain(_)
            | Error::Eval(_)
            | Error::NonConvergence(_) => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
