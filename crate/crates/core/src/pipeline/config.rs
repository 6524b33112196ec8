//! Pipeline configuration: one JSON document, optionally layered over a
//! named preset.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bridge::{CurveTarget, FrequencyBands, PresetOptions, ReBinningSpec, SocLabelPolicy};
use crate::datamodel::{AgeUnit, SplitPolicy, SCHEMA_VERSION};
use crate::mlcore::TrainOptions;
use crate::phm::{PhmCurveKind, ReferencePolicy, DEFAULT_EOL_THRESHOLD};

use super::error::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default = "default_schema")]
    pub schema_version: String,
}

fn default_schema() -> String {
    SCHEMA_VERSION.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        let p = PresetOptions::default();
        KMeansConfig { max_iter: p.max_iter, tol: p.tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub translation: TrainOptions,
    pub refcurve: TrainOptions,
    pub curves: TrainOptions,
    pub phm: TrainOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrognosisConfig {
    /// Position of the reference RPT in each history.
    pub reference: usize,
    /// Position of the early RPT whose difference feeds the model.
    pub early: usize,
    pub unit: AgeUnit,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_EOL_THRESHOLD
}

impl PrognosisConfig {
    pub fn policy(&self) -> ReferencePolicy {
        ReferencePolicy { reference: self.reference, early: Some(self.early) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub split: SplitPolicy,
    #[serde(default)]
    pub bands: FrequencyBands,
    #[serde(default)]
    pub kmeans: KMeansConfig,
    pub soc_policy: SocLabelPolicy,
    /// Lab SOC targets, one model family each.
    pub soc_targets: Vec<f64>,
    pub re_binning: ReBinningSpec,
    pub curve_targets: Vec<CurveTarget>,
    /// PHM inputs; absent means every kind the curve predictors can supply.
    #[serde(default)]
    pub phm_kinds: Option<Vec<PhmCurveKind>>,
    pub ic_window: usize,
    pub training: TrainingConfig,
    #[serde(default)]
    pub diagnosis_reference: usize,
    pub prognosis: PrognosisConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Dataset1,
    Dataset2,
    Synthetic,
}

impl std::str::FromStr for Preset {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dataset1" => Ok(Preset::Dataset1),
            "dataset2" => Ok(Preset::Dataset2),
            "synthetic" => Ok(Preset::Synthetic),
            other => Err(PipelineError::Config(format!("unknown preset {other:?}"))),
        }
    }
}

fn forest(n_estimators: usize, min_samples_leaf: usize, max_features: f64, grid: bool) -> Value {
    json!({
        "hyperparams": {
            "n_estimators": n_estimators,
            "max_depth": null,
            "min_samples_leaf": min_samples_leaf,
            "max_features": {"fraction": max_features},
            "subsample": 1.0,
            "bootstrap": true
        },
        "grid": if grid { serde_json::to_value(crate::mlcore::GridSearchSpec::default()).unwrap() } else { Value::Null }
    })
}

impl Preset {
    /// Every field except `dataset`, `seed` and `out_dir`.
    pub fn document(&self) -> Value {
        let searched = forest(100, 1, 1.0, true);
        match self {
            Preset::Dataset1 => json!({
                "split": {"first_n_train": 2},
                "soc_policy": "decile",
                "soc_targets": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
                "re_binning": "dataset1",
                "curve_targets": ["charge_qv", "discharge_qv"],
                "ic_window": 5,
                "training": {"translation": searched, "refcurve": searched, "curves": searched, "phm": searched},
                "prognosis": {"reference": 0, "early": 2, "unit": "days"}
            }),
            Preset::Dataset2 => json!({
                "split": "odd_even",
                "soc_policy": "all",
                "soc_targets": [0.9],
                "re_binning": "dataset2",
                "curve_targets": ["charge_qv", "discharge_qv", "relaxation_vt"],
                "ic_window": 5,
                "training": {"translation": searched, "refcurve": searched, "curves": searched, "phm": searched},
                "prognosis": {"reference": 0, "early": 1, "unit": "cycles"}
            }),
            Preset::Synthetic => json!({
                "split": {"first_n_train": 3},
                "soc_policy": "all",
                "soc_targets": [0.5, 0.9],
                "re_binning": {"uniform": 4},
                "curve_targets": ["charge_qv", "discharge_qv", "relaxation_vt"],
                "ic_window": 1,
                "training": {
                    "translation": forest(40, 1, 1.0, false),
                    "refcurve": forest(40, 1, 1.0, false),
                    "curves": forest(40, 1, 1.0, false),
                    "phm": forest(60, 1, 1.0, false)
                },
                "prognosis": {"reference": 0, "early": 2, "unit": "days"}
            }),
        }
    }
}

/// Objects merge key by key; anything else in `over` replaces `base`.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl PipelineConfig {
    /// Parse a config document. Relative paths resolve against `base_dir`.
    pub fn from_value(mut doc: Value, base_dir: &Path) -> Result<Self, PipelineError> {
        let preset = match doc.as_object_mut().and_then(|o| o.remove("preset")) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.parse::<Preset>()?),
            Some(other) => return Err(PipelineError::Config(format!("preset must be a string, got {other}"))),
        };
        if let Some(p) = preset {
            let mut base = p.document();
            merge(&mut base, doc);
            doc = base;
        }
        let mut cfg: PipelineConfig = serde_json::from_value(doc).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.dataset.path = base_dir.join(&cfg.dataset.path);
        cfg.out_dir = base_dir.join(&cfg.out_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_value(doc, &base)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.soc_targets.is_empty() {
            return bad("soc_targets is empty".into());
        }
        for (i, &s) in self.soc_targets.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return bad(format!("soc target {s} outside [0, 1]"));
            }
            if self.soc_targets[..i].iter().any(|&o| soc_tag(o) == soc_tag(s)) {
                return bad(format!("duplicate soc target {s}"));
            }
        }
        if self.ic_window == 0 {
            return bad("ic_window must be at least 1".into());
        }
        if !(self.prognosis.threshold > 0.0 && self.prognosis.threshold < 1.0) {
            return bad(format!("life threshold {} outside (0, 1)", self.prognosis.threshold));
        }
        if self.prognosis.early == self.prognosis.reference {
            return bad("prognosis early and reference RPT coincide".into());
        }
        if self.curve_targets.is_empty() {
            return bad("curve_targets is empty".into());
        }
        for t in [&self.training.translation, &self.training.refcurve, &self.training.curves, &self.training.phm] {
            t.hyperparams.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Options with every seed replaced by the global one.
    pub fn seeded(&self, opts: &TrainOptions) -> TrainOptions {
        opts.with_seed(self.seed)
    }

    pub fn preset_options(&self) -> PresetOptions {
        PresetOptions { bands: self.bands, seed: self.seed, max_iter: self.kmeans.max_iter, tol: self.kmeans.tol }
    }
}

/// File-name tag of a lab SOC, e.g. `soc90`.
pub fn soc_tag(soc: f64) -> String {
    format!("soc{:02}", (soc * 100.0).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Value {
        json!({"preset": "synthetic", "dataset": {"path": "data"}, "seed": 3, "out_dir": "out"})
    }

    #[test]
    fn presets_resolve() {
        for p in ["dataset1", "dataset2", "synthetic"] {
            let mut doc = minimal();
            doc["preset"] = json!(p);
            let cfg = PipelineConfig::from_value(doc, Path::new("/cfg")).unwrap();
            assert_eq!(cfg.dataset.path, PathBuf::from("/cfg/data"));
            assert_eq!(cfg.prognosis.threshold, 0.8);
        }
    }

    #[test]
    fn user_values_override_preset() {
        let mut doc = minimal();
        doc["soc_targets"] = json!([0.9]);
        doc["training"] = json!({"phm": {"hyperparams": {"n_estimators": 7}}});
        let cfg = PipelineConfig::from_value(doc, Path::new("")).unwrap();
        assert_eq!(cfg.soc_targets, vec![0.9]);
        assert_eq!(cfg.training.phm.hyperparams.n_estimators, 7);
        assert_eq!(cfg.training.phm.hyperparams.min_samples_leaf, 1);
        assert_eq!(cfg.training.curves.hyperparams.n_estimators, 40);
    }

    #[test]
    fn seed_is_required() {
        let mut doc = minimal();
        doc.as_object_mut().unwrap().remove("seed");
        assert!(matches!(PipelineConfig::from_value(doc, Path::new("")), Err(PipelineError::Config(_))));
    }

    #[test]
    fn unknown_preset_and_fields_rejected() {
        let mut doc = minimal();
        doc["preset"] = json!("dataset3");
        assert!(PipelineConfig::from_value(doc, Path::new("")).is_err());
        let mut doc = minimal();
        doc["colour"] = json!("blue");
        assert!(PipelineConfig::from_value(doc, Path::new("")).is_err());
    }

    #[test]
    fn seed_reaches_every_model() {
        let cfg = PipelineConfig::from_value(minimal(), Path::new("")).unwrap();
        let o = cfg.seeded(&cfg.training.translation);
        assert_eq!(o.hyperparams.seed, 3);
        assert_eq!(cfg.preset_options().seed, 3);
    }

    #[test]
    fn soc_tags() {
        assert_eq!(soc_tag(0.9), "soc90");
        assert_eq!(soc_tag(0.05), "soc05");
        assert_eq!(soc_tag(1.0), "soc100");
    }
}
