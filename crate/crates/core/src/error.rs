use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("fixed-point solver did not converge: {0}")]
    NoSolution(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dataset format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_positive(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite, got {x}")));
    }
    if x <= 0.0 {
        return Err(Error::InvalidParameter(format!("{name} must be > 0, got {x}")));
    }
    Ok(())
}
