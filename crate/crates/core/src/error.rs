use thiserror::Error;

use crate::minimizer::MinimizeReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Backtracking could not find an energy-decreasing step.
    #[error("flow failure: {0}")]
    Flow(String),

    /// No seed reached the residual tolerance; carries the best partial result.
    #[error("no seed converged (best residual {:.3e} after {} iterations)", .0.residual, .0.iterations)]
    NotConverged(Box<MinimizeReport>),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged(_) | Error::Flow(_) => 3,
            Error::Domain(_) | Error::Precondition(_) => 2,
            Error::Format(_) | Error::Io(_) | Error::Json(_) => 1,
        }
    }
}
