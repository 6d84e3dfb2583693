use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Validation failures raised by the sampling, spectral, mask and mixing
/// routines. Every variant is a caller error; nothing here is transient.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("input of {len} elements exceeds the limit of {limit}")]
    SizeLimit { len: usize, limit: usize },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::InvalidShape(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

/// Checks that `dims` describes a 1-, 2- or 3-axis grid with no empty axis.
pub fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > 3 {
        return Err(Error::shape(format!(
            "expected 1 to 3 axes, got {}",
            dims.len()
        )));
    }
    if let Some(axis) = dims.iter().position(|&d| d == 0) {
        return Err(Error::shape(format!("axis {axis} has zero length")));
    }
    Ok(())
}

pub(crate) fn validate_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param(format!(
            "mixing coefficient must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}
