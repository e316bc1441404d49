use thiserror::Error;

/// Errors raised by the numerical library.
///
/// [`Error::is_config`] separates bad input (wrong parameters, unsupported
/// model) from numerical failures, which the CLI maps to distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operation not supported: {0}")]
    Unsupported(String),
    #[error("evaluation energy {omega} lies within the guard band of eigenvalue {eigenvalue}")]
    PoleProximity { omega: f64, eigenvalue: f64 },
    #[error("pole equation has no sign change in the gap ({lo}, {hi})")]
    NoRootInGap { lo: f64, hi: f64 },
    #[error("no eigenvalues within {tol} of {omega}")]
    NoFlatBand { omega: f64, tol: f64 },
    #[error("f(k) vanishes on the grid (min f = {min_f})")]
    SingularF { min_f: f64 },
    #[error("only {points} usable points for the fit (need at least 4)")]
    InsufficientData { points: usize },
}

impl Error {
    /// Stable short name, printed by the CLI on failure.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Unsupported(_) => "Unsupported",
            Error::PoleProximity { .. } => "PoleProximity",
            Error::NoRootInGap { .. } => "NoRootInGap",
            Error::NoFlatBand { .. } => "NoFlatBand",
            Error::SingularF { .. } => "SingularF",
            Error::InsufficientData { .. } => "InsufficientData",
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Unsupported(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
