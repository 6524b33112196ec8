//! Difference curves, two-point features, life targets and the
//! diagnosis/prognosis models.

pub mod btpf;
pub mod curves;
pub mod error;
pub mod life;
pub mod model;

pub use btpf::{extract_btpf, select_btpf, BtpfSpec};
pub use curves::{difference_bundle, difference_curves, measured_bundle, predicted_bundle, CurveBundle, PhmCurve, PhmCurveKind};
pub use error::PhmError;
pub use life::{compute_life_target, LifeTarget, DEFAULT_EOL_THRESHOLD};
pub use model::{feature_vector, predict_phm, train_phm, PhmModel, PhmSample, PhmTask, ReferencePolicy};
