use std::path::PathBuf;

use thiserror::Error;

use super::types::Provenance;

/// Invariant violations raised by the domain type constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("grid needs at least 2 points, got {len}")]
    GridTooShort { len: usize },
    #[error("grid is not strictly increasing at index {index}")]
    NonMonotonicGrid { index: usize },
    #[error("frequency at index {index} is not positive: {value}")]
    NonPositiveFrequency { index: usize, value: f64 },
    #[error("grid step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("{what}: expected {expected} values, found {found}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
    #[error("soc {0} outside [0, 1]")]
    SocOutOfRange(f64),
    #[error("remaining capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),
    #[error("duplicate lab spectrum at soc {0}")]
    DuplicateLabSoc(f64),
    #[error("spectrum provenance must be {expected:?}")]
    WrongProvenance { expected: Provenance },
    #[error("unexpected curve kind {0}")]
    UnexpectedKind(&'static str),
    #[error("duplicate rpt_index {0}")]
    DuplicateRpt(u32),
    #[error("record belongs to cell {found}, expected {expected}")]
    CellIdMismatch { expected: String, found: String },
}

impl ValidationError {
    fn is_grid_class(&self) -> bool {
        matches!(
            self,
            ValidationError::GridTooShort { .. }
                | ValidationError::NonMonotonicGrid { .. }
                | ValidationError::NonPositiveFrequency { .. }
                | ValidationError::NonPositiveStep(_)
                | ValidationError::LengthMismatch { .. }
        )
    }
}

/// Errors raised while ingesting, splitting or generating datasets. Every
/// record-level variant names the cell and, where known, the RPT.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cell {cell}, rpt {rpt:?}: missing field {field}")]
    MissingField { cell: String, rpt: Option<u32>, field: String },
    #[error("cell {cell}, rpt {rpt:?}: bad grid: {detail}")]
    NonMonotonicGrid { cell: String, rpt: Option<u32>, detail: String },
    #[error("cell {cell}: duplicate rpt_index {rpt}")]
    DuplicateRpt { cell: String, rpt: u32 },
    #[error("unknown schema version {0:?}")]
    UnknownSchemaVersion(String),
    #[error("cell {cell}, rpt {rpt:?}: {source}")]
    Invalid {
        cell: String,
        rpt: Option<u32>,
        #[source]
        source: ValidationError,
    },
    #[error("cell {cell}, rpt {rpt:?}: {detail}")]
    Parse { cell: String, rpt: Option<u32>, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("condition group {group:?} has {size} cells, need more than {n}")]
    GroupTooSmall { group: String, size: usize, n: usize },
    #[error("cell {0} has no condition label")]
    MissingCondition(String),
    #[error("cell id {0:?} carries no number")]
    UnnumberedCell(String),
    #[error("resample: empty input")]
    EmptyInput,
    #[error("resample: non-finite sample")]
    NonFiniteSample,
    #[error("resample: x values are not monotone at {0}")]
    NonMonotonicX(f64),
    #[error("resample: grid point {point} outside [{min}, {max}]")]
    GridOutOfRange { point: f64, min: f64, max: f64 },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

impl DataError {
    /// Attach cell/RPT context to a constructor error, mapping grid and
    /// length problems onto [`DataError::NonMonotonicGrid`].
    pub fn from_validation(cell: &str, rpt: Option<u32>, err: ValidationError) -> Self {
        match err {
            ValidationError::DuplicateRpt(r) => DataError::DuplicateRpt { cell: cell.to_string(), rpt: r },
            e if e.is_grid_class() => {
                DataError::NonMonotonicGrid { cell: cell.to_string(), rpt, detail: e.to_string() }
            }
            e => DataError::Invalid { cell: cell.to_string(), rpt, source: e },
        }
    }
}
