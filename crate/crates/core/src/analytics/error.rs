use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("curve has {len} points, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("expected a {expected} curve, got {found}")]
    WrongKind { expected: &'static str, found: &'static str },
    #[error("spectrum has no imaginary part")]
    MissingImaginary,
    #[error("regularized system is singular")]
    SingularSystem,
    #[error("tau grid must be positive and strictly increasing")]
    InvalidTauGrid,
    #[error("lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
    #[error("smoothing window must be at least 1")]
    InvalidWindow,
}
