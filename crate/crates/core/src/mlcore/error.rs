use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("need at least {needed} distinct points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("input is constant")]
    ConstantInput,
    #[error("reference value is zero at index {0}")]
    ZeroReference(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("model document: {0}")]
    Document(String),
}
