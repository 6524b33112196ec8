//! Preset frequencies, field→lab translation, Re/f reconstruction and
//! curve prediction.

pub mod bank;
pub mod binning;
pub mod error;
pub mod preset;
pub mod refcurve;

pub use bank::{
    predict_lab_re, re_at, same_soc, train_translation_bank, translation_pairs, BankConfig, FieldReading, Role, Translation,
    TranslationBank, TranslationPair,
};
pub use binning::{assign_bins, soc_bin, BinFlags, ReBinning, ReBinningSpec, SocLabelPolicy, SOC_BINS};
pub use error::BridgeError;
pub use preset::{select_preset_frequencies, FrequencyBands, PresetFrequencies, PresetOptions};
pub use refcurve::{
    predict_curves, predict_refcurve, refcurve_pairs, train_curve_predictors, train_refcurve, CurvePredictorSet,
    CurveTarget, PredictedCurves, RefCurveModel,
};
