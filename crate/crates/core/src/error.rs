use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("residual density is zero at u = {0}")]
    ZeroDensity(f64),

    #[error("no zero crossing of the score on [{lo}, {hi}]: {reason}")]
    NoCrossing { lo: f64, hi: f64, reason: String },

    #[error("bracket [{lo}, {hi}] does not enclose a sign change (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    BracketInvalid {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("quadrature did not converge: last refinement changed the value by {change:e} (tol {tol:e})")]
    QuadratureDivergence { change: f64, tol: f64 },

    #[error("matrix A is singular (|A| = {0:e})")]
    SingularA(f64),

    #[error("distribution estimate has total mass {mass} < 1; partial first moment {partial}")]
    MassDeficit { partial: f64, mass: f64 },

    #[error("plug-in estimate is undefined on the whole integration grid")]
    AllExcluded,

    #[error("every replication failed for {0}")]
    AllFailed(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of an estimation procedure on otherwise valid input.
    pub fn is_estimation_failure(&self) -> bool {
        matches!(
            self,
            Error::NoCrossing { .. }
                | Error::BracketInvalid { .. }
                | Error::MassDeficit { .. }
                | Error::AllExcluded
                | Error::AllFailed(_)
                | Error::SingularA(_)
                | Error::QuadratureDivergence { .. }
                | Error::ZeroDensity(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
