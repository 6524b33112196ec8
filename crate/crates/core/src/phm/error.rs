use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::mlcore::MlError;

use super::curves::PhmCurveKind;

#[derive(Debug, Error)]
pub enum PhmError {
    #[error("reference RPT {0} is missing or lacks the needed curves")]
    MissingReference(usize),
    #[error("curve grid mismatch for {0:?}")]
    GridMismatch(PhmCurveKind),
    #[error("expected a {expected:?} curve, got {found:?}")]
    KindMismatch { expected: PhmCurveKind, found: PhmCurveKind },
    #[error("curve {0:?} is not available for every sample")]
    MissingKind(PhmCurveKind),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("every candidate feature is constant or undefined")]
    AllConstant,
    #[error("capacity never falls to the threshold")]
    NeverCrosses,
    #[error("rpt {0} has no age marker in the requested unit")]
    MissingAge(u32),
    #[error("no training data")]
    NoData,
    #[error("model document: {0}")]
    Document(String),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Ml(#[from] MlError),
}
