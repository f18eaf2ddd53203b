use thiserror::Error;

/// Errors raised across the library. Each variant maps to one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid set description: {0}")]
    InvalidSet(String),
    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("jump discontinuity: {0}")]
    JumpDiscontinuity(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("linear program: {0}")]
    Lp(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("nothing to charge: {0}")]
    NothingToCharge(String),
    #[error("F not in class for this source: {0}")]
    NotInClass(String),
    #[error("Runge target unreachable at resolution: {0}")]
    RungeTarget(String),
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 1 usage, 2 geometry/resolution, 3 solver, 4 invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse(_) | Error::Io(_) => 1,
            Error::InvalidSet(_) | Error::ResolutionTooCoarse(_) | Error::NothingToCharge(_) => 2,
            Error::Quadrature(_) | Error::Lp(_) | Error::NotConverged(_) | Error::RungeTarget(_) => 3,
            Error::JumpDiscontinuity(_)
            | Error::InvalidMeasure(_)
            | Error::Invariant(_)
            | Error::NotInClass(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
