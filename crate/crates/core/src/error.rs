use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} lies outside the process domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("process is not differentiable at t = {t} ({reason})")]
    NotDifferentiable { t: f64, reason: &'static str },

    #[error("generalized functional undefined at t = {t}: variance is zero")]
    ZeroVariance { t: f64 },

    #[error("quadrature did not converge{}: achieved error {achieved:.3e}, requested {requested:.3e}", .index.map(|k| format!(" (coefficient k = {k})")).unwrap_or_default())]
    Quadrature {
        index: Option<usize>,
        achieved: f64,
        requested: f64,
    },

    #[error("matrix is not positive semidefinite: pivot {pivot} has residual {value:.3e}")]
    NotPositiveSemidefinite { pivot: usize, value: f64 },

    #[error("negative truncation defect {defect:.3e} at t = {t} (Bessel inequality violated)")]
    NegativeDefect { t: f64, defect: f64 },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("variance measure on [0, {horizon}] is not a positive measure (increment {increment:.3e} at t = {t})")]
    NonPositiveVarianceMeasure { horizon: f64, t: f64, increment: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
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
