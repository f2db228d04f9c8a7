use crate::calibration::CalibrationResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument or observation lies outside the support of the model.
    #[error("domain error: {0}")]
    Domain(String),

    /// Every candidate posterior mass underflowed or became NaN.
    #[error("numerical failure at t={t}: {reason}")]
    Numerical { t: usize, reason: String },

    /// The observation has zero likelihood under every particle.
    #[error("particle degeneracy at t={t}: every particle assigns zero likelihood to the observation")]
    Degenerate { t: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// No grid threshold satisfied the calibration target; the nearest miss is carried along.
    #[error("calibration target unattainable; nearest miss delta={}", .0.delta)]
    CalibrationUnattainable(Box<CalibrationResult>),

    /// A covariance matrix failed to factorize.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
