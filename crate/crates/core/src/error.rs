use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::ode::OdeError;
use crate::roots::RootError;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("cannot parse {what}: {source}")]
    Parse { what: String, source: ParseError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    /// A mathematical hypothesis of the asymptotic theory does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Process exit code used by the command line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis(_) => 2,
            Error::Parse { .. } | Error::Invalid(_) | Error::Config(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
