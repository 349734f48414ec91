use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular {what} matrix (determinant {det:e})")]
    SingularMatrix { what: &'static str, det: f64 },

    #[error("{n_layers} layers means 2^{n_layers} quality sequences; enumeration is limited to {max} layers, use the Monte Carlo path instead")]
    TooManyLayers { n_layers: usize, max: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty input")]
    EmptyInput,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
