use thiserror::Error;

/// Errors raised by the Gausson solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{param}`: {reason}")]
    InvalidConfig { param: &'static str, reason: String },

    #[error("shape matrix A is not positive definite (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("positive definiteness of A lost at t = {t}: smallest eigenvalue {min_eig:e}")]
    PositiveDefinitenessLost { t: f64, min_eig: f64 },

    #[error("adaptive step size underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("rotation rate {omega} lies in the gap [{omega1}, {omega2}] where no real widths exist")]
    OutsideStabilityRegion { omega: f64, omega1: f64, omega2: f64 },

    #[error("rotation rate {omega} is not in the requested region {region}")]
    RegionMismatch { omega: f64, region: &'static str },

    #[error("ambiguous branch link at Omega = {omega}: {detail}")]
    BranchAmbiguity { omega: f64, detail: String },

    #[error("eigenvalue solver failed: {0}")]
    EigenSolverFailure(String),

    #[error("non-finite field value detected at t = {t}")]
    NonFinite { t: f64 },

    #[error("degenerate second moments (det = {det:e})")]
    DegenerateMoments { det: f64 },

    #[error("continuation failed at Omega = {omega}: {detail}")]
    ContinuationFailure { omega: f64, detail: String },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(param: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            param,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input parameters rather than solver breakdown.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. } | Error::RegionMismatch { .. } | Error::Parse(_)
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
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
