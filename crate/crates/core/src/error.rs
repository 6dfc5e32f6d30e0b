use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LevyError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("coefficient evaluation failed: {0}")]
    Evaluation(String),
    #[error("integrability error: {0}")]
    Integrability(String),
    #[error("extension construction failed: {0}")]
    Extension(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported dimension {0} (at most {1} supported)")]
    UnsupportedDimension(usize, usize),
    #[error("consistency error: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, LevyError>;
