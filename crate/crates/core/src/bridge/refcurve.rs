use serde::{Deserialize, Serialize};

use crate::datamodel::{EisSpectrum, FrequencyGrid, Provenance, RptRecord, TimeCurve, TimeCurveKind, UniformGrid, VoltageCurve, VoltageCurveKind};
use crate::mlcore::{fit_adaptive, ForestModel, Matrix, TrainOptions};

use super::bank::re_at;
use super::error::BridgeError;
use super::preset::PresetFrequencies;

pub const REFCURVE_FORMAT: &str = "labbridge.refcurve";
pub const CURVES_FORMAT: &str = "labbridge.curves";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document<T> {
    format: String,
    schema_version: u32,
    body: T,
}

fn to_document<T: Serialize>(format: &str, body: &T) -> Result<String, BridgeError> {
    serde_json::to_string(&Document { format: format.to_string(), schema_version: SCHEMA_VERSION, body })
        .map_err(|e| BridgeError::Document(e.to_string()))
}

fn from_document<T: for<'de> Deserialize<'de>>(format: &str, s: &str) -> Result<T, BridgeError> {
    let doc: Document<T> = serde_json::from_str(s).map_err(|e| BridgeError::Document(e.to_string()))?;
    if doc.format != format || doc.schema_version != SCHEMA_VERSION {
        return Err(BridgeError::Document(format!("expected {format} v{SCHEMA_VERSION}, got {} v{}", doc.format, doc.schema_version)));
    }
    Ok(doc.body)
}

/// (Re1^L, Re2^L) → lab Re/f curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefCurveModel {
    pub grid: FrequencyGrid,
    pub target_soc: f64,
    pub lab_temperature: f64,
    pub model: ForestModel,
}

/// Measured (Re1^L, Re2^L) and the full lab curve at `target_soc`.
pub fn refcurve_pairs<'a>(
    records: impl IntoIterator<Item = &'a RptRecord>,
    preset: &PresetFrequencies,
    target_soc: f64,
) -> Result<Vec<([f64; 2], &'a EisSpectrum)>, BridgeError> {
    let mut out = Vec::new();
    for r in records {
        if let Some(lab) = r.lab_spectrum(target_soc) {
            out.push(([re_at(lab, preset.f1)?, re_at(lab, preset.f2)?], lab));
        }
    }
    Ok(out)
}

pub fn train_refcurve(pairs: &[([f64; 2], &EisSpectrum)], opts: &TrainOptions) -> Result<RefCurveModel, BridgeError> {
    let (_, first) = pairs.first().ok_or(BridgeError::NoData)?;
    let grid = first.grid().clone();
    if pairs.iter().any(|(_, s)| !s.grid().matches(&grid)) {
        return Err(BridgeError::GridMismatch);
    }
    let x: Vec<[f64; 2]> = pairs.iter().map(|(x, _)| *x).collect();
    let y: Vec<&[f64]> = pairs.iter().map(|(_, s)| s.re()).collect();
    let fit = fit_adaptive(&Matrix::from_rows(&x)?, &Matrix::from_rows(&y)?, opts)?;
    Ok(RefCurveModel { grid, target_soc: first.soc(), lab_temperature: first.temperature(), model: fit.model })
}

impl RefCurveModel {
    pub fn predict(&self, re1_l: f64, re2_l: f64) -> Result<EisSpectrum, BridgeError> {
        let re = self.model.predict(&[re1_l, re2_l])?;
        EisSpectrum::new(self.grid.clone(), re, None, self.target_soc, self.lab_temperature, Provenance::Lab)
            .map_err(|e| BridgeError::Document(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String, BridgeError> {
        to_document(REFCURVE_FORMAT, self)
    }

    pub fn from_json(s: &str) -> Result<Self, BridgeError> {
        from_document(REFCURVE_FORMAT, s)
    }
}

pub fn predict_refcurve(m: &RefCurveModel, re1_l: f64, re2_l: f64) -> Result<EisSpectrum, BridgeError> {
    m.predict(re1_l, re2_l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveTarget {
    #[serde(rename = "charge_qv")]
    ChargeQV,
    #[serde(rename = "discharge_qv")]
    DischargeQV,
    #[serde(rename = "relaxation_vt")]
    RelaxationVT,
}

impl CurveTarget {
    pub const ALL: [CurveTarget; 3] = [CurveTarget::ChargeQV, CurveTarget::DischargeQV, CurveTarget::RelaxationVT];

    pub fn as_str(&self) -> &'static str {
        match self {
            CurveTarget::ChargeQV => "charge_qv",
            CurveTarget::DischargeQV => "discharge_qv",
            CurveTarget::RelaxationVT => "relaxation_vt",
        }
    }

    fn extract<'a>(&self, r: &'a RptRecord) -> Option<(&'a UniformGrid, &'a [f64])> {
        match self {
            CurveTarget::ChargeQV => r.charge_qv.as_ref().map(|c| (c.grid(), c.values())),
            CurveTarget::DischargeQV => r.discharge_qv.as_ref().map(|c| (c.grid(), c.values())),
            CurveTarget::RelaxationVT => r.relaxation.as_ref().map(|c| (c.grid(), c.values())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveModel {
    pub target: CurveTarget,
    pub grid: UniformGrid,
    pub model: ForestModel,
}

/// Lab Re/f curve → charge Q/V, discharge Q/V and relaxation V/t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePredictorSet {
    pub input_grid: FrequencyGrid,
    pub target_soc: f64,
    pub models: Vec<CurveModel>,
    /// Requested targets without training data.
    pub missing: Vec<CurveTarget>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PredictedCurves {
    pub charge_qv: Option<VoltageCurve>,
    pub discharge_qv: Option<VoltageCurve>,
    pub relaxation: Option<TimeCurve>,
}

/// Inputs are the measured lab Re/f curves at `target_soc`.
pub fn train_curve_predictors(
    records: &[&RptRecord],
    target_soc: f64,
    targets: &[CurveTarget],
    opts: &TrainOptions,
) -> Result<CurvePredictorSet, BridgeError> {
    let with_lab: Vec<(&RptRecord, &EisSpectrum)> =
        records.iter().filter_map(|r| r.lab_spectrum(target_soc).map(|s| (*r, s))).collect();
    let (_, first) = with_lab.first().ok_or(BridgeError::NoData)?;
    let input_grid = first.grid().clone();
    if with_lab.iter().any(|(_, s)| !s.grid().matches(&input_grid)) {
        return Err(BridgeError::GridMismatch);
    }
    let mut models = Vec::new();
    let mut missing = Vec::new();
    for &target in targets {
        let rows: Vec<(&[f64], &UniformGrid, &[f64])> =
            with_lab.iter().filter_map(|(r, s)| target.extract(r).map(|(g, v)| (s.re(), g, v))).collect();
        let Some(&(_, grid, _)) = rows.first() else {
            log::warn!("no {} curves for soc {target_soc}", target.as_str());
            missing.push(target);
            continue;
        };
        if rows.iter().any(|(_, g, _)| !g.matches(grid)) {
            return Err(BridgeError::GridMismatch);
        }
        let x: Vec<&[f64]> = rows.iter().map(|r| r.0).collect();
        let y: Vec<&[f64]> = rows.iter().map(|r| r.2).collect();
        let fit = fit_adaptive(&Matrix::from_rows(&x)?, &Matrix::from_rows(&y)?, opts)?;
        models.push(CurveModel { target, grid: *grid, model: fit.model });
    }
    Ok(CurvePredictorSet { input_grid, target_soc, models, missing })
}

impl CurvePredictorSet {
    pub fn model(&self, target: CurveTarget) -> Option<&CurveModel> {
        self.models.iter().find(|m| m.target == target)
    }

    pub fn predict(&self, refcurve: &EisSpectrum) -> Result<PredictedCurves, BridgeError> {
        if !refcurve.grid().matches(&self.input_grid) {
            return Err(BridgeError::GridMismatch);
        }
        let mut out = PredictedCurves::default();
        for m in &self.models {
            let values = m.model.predict(refcurve.re())?;
            let doc = |e: crate::datamodel::ValidationError| BridgeError::Document(e.to_string());
            match m.target {
                CurveTarget::ChargeQV => out.charge_qv = Some(VoltageCurve::new(m.grid, values, VoltageCurveKind::ChargeQV).map_err(doc)?),
                CurveTarget::DischargeQV => {
                    out.discharge_qv = Some(VoltageCurve::new(m.grid, values, VoltageCurveKind::DischargeQV).map_err(doc)?)
                }
                CurveTarget::RelaxationVT => out.relaxation = Some(TimeCurve::new(m.grid, values, TimeCurveKind::RelaxationVT).map_err(doc)?),
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String, BridgeError> {
        to_document(CURVES_FORMAT, self)
    }

    pub fn from_json(s: &str) -> Result<Self, BridgeError> {
        from_document(CURVES_FORMAT, s)
    }
}

pub fn predict_curves(set: &CurvePredictorSet, refcurve: &EisSpectrum) -> Result<PredictedCurves, BridgeError> {
    set.predict(refcurve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::synth::{synth_generate, SynthConfig};
    use crate::mlcore::ForestHyperparams;

    fn memorising() -> TrainOptions {
        TrainOptions { hyperparams: ForestHyperparams { n_estimators: 1, bootstrap: false, ..Default::default() }, grid: None }
    }

    fn preset(f1: f64, f2: f64) -> PresetFrequencies {
        PresetFrequencies { f1, f2, bands: Default::default(), vote_counts: vec![] }
    }

    #[test]
    fn refcurve_memorises_training_pairs() {
        let cfg = SynthConfig { n_cells: 4, temperatures_c: vec![25.0], ..SynthConfig::desk_default() };
        let cells = synth_generate(&cfg, 1).unwrap();
        let grid = cells[0].records[0].lab_spectra[0].grid().as_slice().to_vec();
        let p = preset(grid[5], grid[12]);
        let records: Vec<&RptRecord> = cells.iter().flat_map(|c| &c.records).collect();
        let pairs = refcurve_pairs(records.iter().copied(), &p, 0.9).unwrap();
        let m = train_refcurve(&pairs, &memorising()).unwrap();
        assert_eq!(m.model.output_dim, 16);
        for (x, s) in &pairs {
            assert_eq!(m.predict(x[0], x[1]).unwrap().re(), s.re());
        }
        let back = RefCurveModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn curve_predictors_lengths_and_missing_relaxation() {
        let cfg = SynthConfig { n_cells: 2, temperatures_c: vec![25.0], relaxation_grid: None, ..SynthConfig::desk_default() };
        let cells = synth_generate(&cfg, 2).unwrap();
        let records: Vec<&RptRecord> = cells.iter().flat_map(|c| &c.records).collect();
        let set = train_curve_predictors(&records, 0.5, &CurveTarget::ALL, &memorising()).unwrap();
        assert_eq!(set.missing, vec![CurveTarget::RelaxationVT]);
        assert_eq!(set.model(CurveTarget::ChargeQV).unwrap().model.output_dim, 160);
        let curves = set.predict(records[3].lab_spectrum(0.5).unwrap()).unwrap();
        assert_eq!(curves.charge_qv.unwrap().values(), records[3].charge_qv.as_ref().unwrap().values());
        assert!(curves.relaxation.is_none());
        let back = CurvePredictorSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn relaxation_length() {
        let cfg = SynthConfig { n_cells: 2, temperatures_c: vec![25.0], ..SynthConfig::desk_default() };
        let cells = synth_generate(&cfg, 2).unwrap();
        let records: Vec<&RptRecord> = cells.iter().flat_map(|c| &c.records).collect();
        let set = train_curve_predictors(&records, 0.9, &[CurveTarget::RelaxationVT], &memorising()).unwrap();
        let m = set.model(CurveTarget::RelaxationVT).unwrap();
        assert_eq!((m.model.output_dim, m.grid.step()), (50, 60.0));
    }
}
