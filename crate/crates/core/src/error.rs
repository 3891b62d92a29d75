use thiserror::Error;

pub type Result<T, E = GenexError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GenexError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("architecture mismatch: expected `{expected}`, got `{got}`")]
    ArchitectureMismatch { expected: String, got: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GenexError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        GenexError::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GenexError::InvalidInput(msg.into())
    }
}
