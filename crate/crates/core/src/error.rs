use thiserror::Error;

use crate::sdp::ConvergenceFailure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Convergence(Box<ConvergenceFailure>),

    #[error("property violation: {0}")]
    PropertyViolation(String),

    /// Every sweep cut was improper or crossed no demand.
    #[error("no proper cut with positive demand crossing among the sweep cuts")]
    NoProperCut,
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
