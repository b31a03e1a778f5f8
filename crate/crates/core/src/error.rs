use thiserror::Error;

/// Errors raised by the simulator.
///
/// Variants split into two families: argument errors (a caller asked for
/// something outside an operation's domain) and numerical-invariant errors
/// (a state or transform stopped being physical). The CLI maps them to
/// different exit codes through [`SqzError::is_invariant_violation`].
#[derive(Debug, Error)]
pub enum SqzError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mode index {mode} out of range for a {n_modes}-mode state")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("{0}")]
    Unsupported(String),

    /// The measured quadrature has no spread, so conditioning is undefined.
    #[error("degenerate measurement: quadrature variance {variance} is not positive")]
    DegenerateMeasurement { variance: f64 },

    #[error("not symplectic: deviation {deviation:e} exceeds tolerance")]
    NonSymplectic { deviation: f64 },

    #[error("invalid Gaussian state: {0}")]
    InvalidState(String),

    #[error("covariances are not co-aligned: residual correlation {residual:e}")]
    NotCoaligned { residual: f64 },

    #[error("singular covariance matrix")]
    SingularCovariance,

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SqzError {
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            SqzError::DegenerateMeasurement { .. }
                | SqzError::NonSymplectic { .. }
                | SqzError::InvalidState(_)
                | SqzError::NotCoaligned { .. }
                | SqzError::SingularCovariance
        )
    }
}

pub type SqzResult<T> = Result<T, SqzError>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> SqzResult<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SqzError::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}
