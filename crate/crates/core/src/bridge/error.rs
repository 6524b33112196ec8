use thiserror::Error;

use crate::mlcore::MlError;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("curve {curve} has fewer than 2 points in the {band} band")]
    BandEmpty { curve: usize, band: &'static str },
    #[error("no training curves")]
    NoCurves,
    #[error("no training data")]
    NoData,
    #[error("no model available for soc bin {soc_bin}")]
    NoModelAvailable { soc_bin: usize },
    #[error("frequency grid mismatch")]
    GridMismatch,
    #[error("frequency {0} Hz is not on the spectrum grid")]
    FrequencyNotOnGrid(f64),
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("invalid band bounds: {0}")]
    InvalidBands(String),
    #[error("artifact document: {0}")]
    Document(String),
    #[error(transparent)]
    Ml(#[from] MlError),
}
