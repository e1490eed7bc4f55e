use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("accuracy gate failed: {0}")]
    Accuracy(String),

    #[error("padding error: {0}")]
    Padding(String),

    #[error("unstable parameters: max eigenvalue real part {max_real_part:e} s^-1 is not negative")]
    Unstable { max_real_part: f64 },

    #[error("spectrum evaluation failed at omega = {omega:e} rad/s: {reason}")]
    Spectrum { omega: f64, reason: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("realization {realization} diverged at step {step}")]
    Divergence { realization: usize, step: usize },

    #[error("no grid points inside band [{lo:e}, {hi:e}] rad/s")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("grid file error: {0}")]
    GridFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Checks `value > 0` and finite, naming the field on failure.
pub(crate) fn ensure_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and >= 0, got {value}")))
    }
}

pub(crate) fn ensure_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite, got {value}")))
    }
}
