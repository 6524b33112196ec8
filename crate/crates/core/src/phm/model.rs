use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::AgeUnit;
use crate::mlcore::{fit_adaptive, ForestModel, Matrix, TrainOptions};

use super::btpf::{extract_btpf, select_btpf, BtpfSpec};
use super::curves::{CurveBundle, PhmCurve, PhmCurveKind};
use super::error::PhmError;

pub const PHM_FORMAT: &str = "labbridge.phm";
pub const PHM_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhmTask {
    Diagnosis,
    Prognosis,
}

impl PhmTask {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhmTask::Diagnosis => "diagnosis",
            PhmTask::Prognosis => "prognosis",
        }
    }
}

/// Which RPTs the difference curves compare, as positions in the
/// rpt-ordered history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePolicy {
    pub reference: usize,
    /// Prognosis only: the early RPT whose difference is the input.
    pub early: Option<usize>,
}

/// One training or evaluation example: difference curves and a target.
#[derive(Debug, Clone, PartialEq)]
pub struct PhmSample {
    pub cell_id: String,
    pub rpt_index: u32,
    pub curves: CurveBundle,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhmModel {
    pub task: PhmTask,
    pub policy: ReferencePolicy,
    /// Prognosis target unit.
    pub unit: Option<AgeUnit>,
    /// Feature order.
    pub features: Vec<BtpfSpec>,
    pub forest: ForestModel,
    pub n_train: usize,
}

#[derive(Serialize, Deserialize)]
struct PhmDocument {
    format: String,
    schema_version: u32,
    model: PhmModel,
}

pub fn feature_vector(features: &[BtpfSpec], curves: &CurveBundle) -> Result<Vec<f64>, PhmError> {
    features
        .iter()
        .map(|spec| {
            let c = curves.get(&spec.kind).ok_or(PhmError::MissingKind(spec.kind))?;
            extract_btpf(c, spec)
        })
        .collect()
}

/// Select one BTPF per kind on the training samples and fit the forest.
pub fn train_phm(
    task: PhmTask,
    samples: &[PhmSample],
    kinds: &[PhmCurveKind],
    policy: ReferencePolicy,
    unit: Option<AgeUnit>,
    opts: &TrainOptions,
) -> Result<PhmModel, PhmError> {
    if samples.is_empty() || kinds.is_empty() {
        return Err(PhmError::NoData);
    }
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    let features = kinds
        .par_iter()
        .map(|&kind| {
            let curves: Vec<&PhmCurve> =
                samples.iter().map(|s| s.curves.get(&kind).ok_or(PhmError::MissingKind(kind))).collect::<Result<_, _>>()?;
            select_btpf(&curves, &targets)
        })
        .collect::<Result<Vec<_>, _>>()?;
    for f in &features {
        log::debug!("{} btpf {}", task.as_str(), f.describe());
    }
    let x: Vec<Vec<f64>> = samples.iter().map(|s| feature_vector(&features, &s.curves)).collect::<Result<_, _>>()?;
    let fit = fit_adaptive(&Matrix::from_rows(&x)?, &Matrix::column(&targets), opts)?;
    Ok(PhmModel { task, policy, unit, features, forest: fit.model, n_train: samples.len() })
}

impl PhmModel {
    pub fn kinds(&self) -> Vec<PhmCurveKind> {
        self.features.iter().map(|f| f.kind).collect()
    }

    pub fn predict(&self, curves: &CurveBundle) -> Result<f64, PhmError> {
        let x = feature_vector(&self.features, curves)?;
        Ok(self.forest.predict(&x)?[0])
    }

    pub fn to_json(&self) -> Result<String, PhmError> {
        let doc = PhmDocument { format: PHM_FORMAT.into(), schema_version: PHM_SCHEMA_VERSION, model: self.clone() };
        serde_json::to_string(&doc).map_err(|e| PhmError::Document(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, PhmError> {
        let doc: PhmDocument = serde_json::from_str(s).map_err(|e| PhmError::Document(e.to_string()))?;
        if doc.format != PHM_FORMAT || doc.schema_version != PHM_SCHEMA_VERSION {
            return Err(PhmError::Document(format!("unsupported document {} v{}", doc.format, doc.schema_version)));
        }
        Ok(doc.model)
    }
}

pub fn predict_phm(model: &PhmModel, curves: &CurveBundle) -> Result<f64, PhmError> {
    model.predict(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::synth::{synth_generate, SynthConfig};
    use crate::mlcore::ForestHyperparams;
    use crate::phm::curves::{difference_curves, measured_bundle};

    fn diagnosis_samples() -> Vec<PhmSample> {
        let cfg = SynthConfig { n_cells: 4, temperatures_c: vec![25.0], ..SynthConfig::desk_default() };
        let mut out = Vec::new();
        for cell in synth_generate(&cfg, 8).unwrap() {
            let bundles: Vec<CurveBundle> = cell.records.iter().map(|r| measured_bundle(r, 0.9, 1).unwrap()).collect();
            for (r, d) in cell.records.iter().zip(difference_curves(&bundles, 0).unwrap()) {
                out.push(PhmSample { cell_id: cell.cell_id.clone(), rpt_index: r.rpt_index, curves: d, target: r.remaining_capacity });
            }
        }
        out
    }

    #[test]
    fn diagnosis_on_synthetic_history() {
        let samples = diagnosis_samples();
        let opts = TrainOptions { hyperparams: ForestHyperparams { n_estimators: 30, ..Default::default() }, grid: None };
        let policy = ReferencePolicy { reference: 0, early: None };
        let m = train_phm(PhmTask::Diagnosis, &samples, &PhmCurveKind::ALL, policy, None, &opts).unwrap();
        assert_eq!(m.features.len(), 8);
        assert!(m.features.iter().all(|f| f.training_correlation.abs() > 0.9));
        let (lo, hi) = m.forest.target_range[0];
        for s in &samples {
            let p = m.predict(&s.curves).unwrap();
            assert!(p >= lo && p <= hi);
        }
        // the reference RPT gives an all-zero feature vector
        let zero = m.predict(&samples[0].curves).unwrap();
        assert!(zero.is_finite());
        let back = PhmModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn missing_kind() {
        let mut samples = diagnosis_samples();
        samples[3].curves.remove(&PhmCurveKind::RelaxationVT);
        let policy = ReferencePolicy { reference: 0, early: None };
        let r = train_phm(PhmTask::Diagnosis, &samples, &[PhmCurveKind::RelaxationVT], policy, None, &TrainOptions::default());
        assert!(matches!(r, Err(PhmError::MissingKind(PhmCurveKind::RelaxationVT))));
    }
}
