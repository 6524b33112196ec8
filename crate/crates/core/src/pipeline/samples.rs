//! PHM samples from measured curves and from the field→lab prediction chain.

use crate::bridge::{
    same_soc, CurvePredictorSet, CurveTarget, FieldReading, PredictedCurves, RefCurveModel, Translation, TranslationBank,
};
use crate::datamodel::{CellHistory, EisSpectrum};
use crate::phm::{
    compute_life_target, difference_bundle, measured_bundle, predicted_bundle, CurveBundle, PhmCurveKind, PhmError,
    PhmSample,
};

use super::config::PipelineConfig;
use super::error::PipelineError;

/// Curve kinds a predictor set can supply, Re/f first.
pub fn available_kinds(set: &CurvePredictorSet) -> Vec<PhmCurveKind> {
    let mut out = vec![PhmCurveKind::ReF];
    for m in &set.models {
        match m.target {
            CurveTarget::ChargeQV => out.extend([PhmCurveKind::ChargeQV, PhmCurveKind::ChargeIC, PhmCurveKind::ChargeDV]),
            CurveTarget::DischargeQV => {
                out.extend([PhmCurveKind::DischargeQV, PhmCurveKind::DischargeIC, PhmCurveKind::DischargeDV])
            }
            CurveTarget::RelaxationVT => out.push(PhmCurveKind::RelaxationVT),
        }
    }
    out.sort();
    out
}

/// Configured PHM kinds, checked against what the predictors supply.
pub fn resolve_kinds(cfg: &PipelineConfig, set: &CurvePredictorSet) -> Result<Vec<PhmCurveKind>, PipelineError> {
    let available = available_kinds(set);
    match &cfg.phm_kinds {
        None => Ok(available),
        Some(kinds) => {
            if let Some(k) = kinds.iter().find(|k| !available.contains(k)) {
                return Err(PipelineError::Config(format!("phm kind {} has no curve predictor", k.as_str())));
            }
            Ok(kinds.clone())
        }
    }
}

fn restrict(bundle: CurveBundle, kinds: &[PhmCurveKind]) -> Result<CurveBundle, PhmError> {
    let mut out = bundle;
    out.retain(|k, _| kinds.contains(k));
    if let Some(k) = kinds.iter().find(|k| !out.contains_key(k)) {
        return Err(PhmError::MissingKind(*k));
    }
    Ok(out)
}

/// Diagnosis samples, one per RPT, targets in Ah.
pub fn measured_diagnosis(
    cells: &[CellHistory],
    soc: f64,
    cfg: &PipelineConfig,
    kinds: &[PhmCurveKind],
) -> Result<Vec<PhmSample>, PipelineError> {
    let mut out = Vec::new();
    let reference = cfg.diagnosis_reference;
    for cell in cells {
        let base_record = cell.records.get(reference).ok_or(PhmError::MissingReference(reference))?;
        let base = restrict(measured_bundle(base_record, soc, cfg.ic_window)?, kinds)?;
        for r in &cell.records {
            let cur = restrict(measured_bundle(r, soc, cfg.ic_window)?, kinds)?;
            out.push(PhmSample {
                cell_id: cell.cell_id.clone(),
                rpt_index: r.rpt_index,
                curves: difference_bundle(&cur, &base, reference)?,
                target: r.remaining_capacity,
            });
        }
    }
    Ok(out)
}

/// Remaining life at the early RPT, or `None` when the cell never reaches
/// end of life.
pub fn life_at_early(cell: &CellHistory, cfg: &PipelineConfig) -> Result<Option<f64>, PipelineError> {
    let p = &cfg.prognosis;
    match compute_life_target(cell, p.threshold, p.unit) {
        Ok(t) => Ok(Some(*t.remaining.get(p.early).ok_or(PhmError::MissingReference(p.early))?)),
        Err(PhmError::NeverCrosses) => {
            log::warn!("cell {} never reaches end of life; excluded from prognosis", cell.cell_id);
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Prognosis samples, one per cell that reaches end of life.
pub fn measured_prognosis(
    cells: &[CellHistory],
    soc: f64,
    cfg: &PipelineConfig,
    kinds: &[PhmCurveKind],
) -> Result<Vec<PhmSample>, PipelineError> {
    let p = &cfg.prognosis;
    let mut out = Vec::new();
    for cell in cells {
        let Some(target) = life_at_early(cell, cfg)? else { continue };
        let base = cell.records.get(p.reference).ok_or(PhmError::MissingReference(p.reference))?;
        let early = cell.records.get(p.early).ok_or(PhmError::MissingReference(p.early))?;
        let b = restrict(measured_bundle(base, soc, cfg.ic_window)?, kinds)?;
        let e = restrict(measured_bundle(early, soc, cfg.ic_window)?, kinds)?;
        out.push(PhmSample {
            cell_id: cell.cell_id.clone(),
            rpt_index: early.rpt_index,
            curves: difference_bundle(&e, &b, p.reference)?,
            target,
        });
    }
    Ok(out)
}

/// Translation bank, Re/f reconstruction and curve predictors of one lab SOC.
#[derive(Debug, Clone)]
pub struct Chain {
    pub bank: TranslationBank,
    pub refcurve: RefCurveModel,
    pub curves: CurvePredictorSet,
}

/// Every intermediate of one pass through the chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub translation: Translation,
    pub refcurve: EisSpectrum,
    pub curves: PredictedCurves,
    pub bundle: CurveBundle,
}

impl Chain {
    pub fn run(&self, reading: &FieldReading, ic_window: usize) -> Result<ChainOutput, PipelineError> {
        let translation = self.bank.predict(reading)?;
        let refcurve = self.refcurve.predict(translation.re[0], translation.re[1])?;
        let curves = self.curves.predict(&refcurve)?;
        let bundle = predicted_bundle(&refcurve, &curves, ic_window)?;
        Ok(ChainOutput { translation, refcurve, curves, bundle })
    }

    pub fn reading(&self, field: &EisSpectrum) -> Result<FieldReading, PipelineError> {
        let p = &self.bank.preset;
        Ok(FieldReading {
            re: [crate::bridge::re_at(field, p.f1)?, crate::bridge::re_at(field, p.f2)?],
            soc: field.soc(),
            temperature: field.temperature(),
        })
    }

    /// Predicted difference curves of `current` against `reference`.
    pub fn difference(
        &self,
        current: &FieldReading,
        reference: &FieldReading,
        kinds: &[PhmCurveKind],
        ic_window: usize,
        reference_index: usize,
    ) -> Result<CurveBundle, PipelineError> {
        let cur = restrict(self.run(current, ic_window)?.bundle, kinds)?;
        let base = restrict(self.run(reference, ic_window)?.bundle, kinds)?;
        Ok(difference_bundle(&cur, &base, reference_index)?)
    }
}

/// Field spectrum of `record` taken under the same condition as `like`.
fn matching_field<'a>(record: &'a crate::datamodel::RptRecord, like: &EisSpectrum) -> Option<&'a EisSpectrum> {
    record.field_spectra.iter().find(|s| same_soc(s.soc(), like.soc()) && s.temperature() == like.temperature())
}

/// A sample tagged with the field spectrum index it was predicted from.
pub type ChannelSample = (usize, PhmSample);

/// Diagnosis samples from predicted curves, one per RPT and field channel
/// the bank accepts.
pub fn predicted_diagnosis(
    cells: &[CellHistory],
    chain: &Chain,
    cfg: &PipelineConfig,
    kinds: &[PhmCurveKind],
) -> Result<Vec<ChannelSample>, PipelineError> {
    let reference = cfg.diagnosis_reference;
    let mut out = Vec::new();
    for cell in cells {
        let base_record = cell.records.get(reference).ok_or(PhmError::MissingReference(reference))?;
        for (c, base_field) in base_record.field_spectra.iter().enumerate() {
            if !chain.bank.accepts(base_field.soc()) {
                continue;
            }
            let base = restrict(chain.run(&chain.reading(base_field)?, cfg.ic_window)?.bundle, kinds)?;
            for r in &cell.records {
                let Some(field) = matching_field(r, base_field) else { continue };
                let cur = restrict(chain.run(&chain.reading(field)?, cfg.ic_window)?.bundle, kinds)?;
                out.push((
                    c,
                    PhmSample {
                        cell_id: cell.cell_id.clone(),
                        rpt_index: r.rpt_index,
                        curves: difference_bundle(&cur, &base, reference)?,
                        target: r.remaining_capacity,
                    },
                ));
            }
        }
    }
    Ok(out)
}

/// Prognosis samples from predicted curves, one per cell and field channel.
pub fn predicted_prognosis(
    cells: &[CellHistory],
    chain: &Chain,
    cfg: &PipelineConfig,
    kinds: &[PhmCurveKind],
) -> Result<Vec<ChannelSample>, PipelineError> {
    let p = &cfg.prognosis;
    let mut out = Vec::new();
    for cell in cells {
        let Some(target) = life_at_early(cell, cfg)? else { continue };
        let base = cell.records.get(p.reference).ok_or(PhmError::MissingReference(p.reference))?;
        let early = cell.records.get(p.early).ok_or(PhmError::MissingReference(p.early))?;
        for (c, base_field) in base.field_spectra.iter().enumerate() {
            if !chain.bank.accepts(base_field.soc()) {
                continue;
            }
            let Some(early_field) = matching_field(early, base_field) else { continue };
            let curves =
                chain.difference(&chain.reading(early_field)?, &chain.reading(base_field)?, kinds, cfg.ic_window, p.reference)?;
            out.push((c, PhmSample { cell_id: cell.cell_id.clone(), rpt_index: early.rpt_index, curves, target }));
        }
    }
    Ok(out)
}
