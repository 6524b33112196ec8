use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bridge::{CurvePredictorSet, PresetFrequencies, RefCurveModel, TranslationBank};
use crate::phm::{PhmModel, PhmTask};

use super::config::soc_tag;
use super::error::PipelineError;

pub const PRESET_FORMAT: &str = "labbridge.preset";
pub const PRESET_SCHEMA_VERSION: u32 = 1;

/// Output of frequency selection, including the vote table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetReport {
    pub format: String,
    pub schema_version: u32,
    pub n_curves: usize,
    pub preset: PresetFrequencies,
}

impl PresetReport {
    pub fn new(preset: PresetFrequencies, n_curves: usize) -> Self {
        PresetReport { format: PRESET_FORMAT.into(), schema_version: PRESET_SCHEMA_VERSION, n_curves, preset }
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        serde_json::to_string_pretty(self).map_err(|e| PipelineError::Report(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        let r: PresetReport = serde_json::from_str(s).map_err(|e| PipelineError::Report(e.to_string()))?;
        if r.format != PRESET_FORMAT || r.schema_version != PRESET_SCHEMA_VERSION {
            return Err(PipelineError::Report(format!("unsupported document {} v{}", r.format, r.schema_version)));
        }
        Ok(r)
    }
}

/// File layout of one output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Artifacts { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn preset(&self) -> PathBuf {
        self.dir.join("preset_freqs.json")
    }

    pub fn bank(&self, soc: f64) -> PathBuf {
        self.dir.join(format!("translation_bank_{}.json", soc_tag(soc)))
    }

    pub fn refcurve(&self, soc: f64) -> PathBuf {
        self.dir.join(format!("refcurve_{}.json", soc_tag(soc)))
    }

    pub fn curves(&self, soc: f64) -> PathBuf {
        self.dir.join(format!("curves_{}.json", soc_tag(soc)))
    }

    pub fn phm(&self, task: PhmTask, soc: f64) -> PathBuf {
        self.dir.join(format!("phm_{}_{}.json", task.as_str(), soc_tag(soc)))
    }

    pub fn metrics_train(&self) -> PathBuf {
        self.dir.join("metrics_train.csv")
    }

    pub fn eval(&self, split: &str) -> PathBuf {
        self.dir.join(format!("eval_{split}.csv"))
    }

    pub fn eval_points(&self, split: &str) -> PathBuf {
        self.dir.join(format!("eval_points_{split}.csv"))
    }

    pub fn plots(&self, split: &str) -> PathBuf {
        self.dir.join(format!("plots_{split}"))
    }

    pub fn load_preset(&self) -> Result<PresetReport, PipelineError> {
        PresetReport::from_json(&read(&self.preset())?)
    }

    pub fn load_bank(&self, soc: f64) -> Result<TranslationBank, PipelineError> {
        Ok(TranslationBank::from_json(&read(&self.bank(soc))?)?)
    }

    pub fn load_refcurve(&self, soc: f64) -> Result<RefCurveModel, PipelineError> {
        Ok(RefCurveModel::from_json(&read(&self.refcurve(soc))?)?)
    }

    pub fn load_curves(&self, soc: f64) -> Result<CurvePredictorSet, PipelineError> {
        Ok(CurvePredictorSet::from_json(&read(&self.curves(soc))?)?)
    }

    pub fn load_phm(&self, task: PhmTask, soc: f64) -> Result<PhmModel, PipelineError> {
        Ok(PhmModel::from_json(&read(&self.phm(task, soc))?)?)
    }
}

/// Read an artifact; absence is [`PipelineError::MissingArtifact`].
pub fn read(path: &Path) -> Result<String, PipelineError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(PipelineError::MissingArtifact(path.to_path_buf())),
        Err(e) => Err(PipelineError::io(path, e)),
    }
}

pub fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}
