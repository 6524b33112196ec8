use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analytics::{dv_curve, ic_curve};
use crate::bridge::PredictedCurves;
use crate::datamodel::{EisSpectrum, RptRecord, TimeCurve, VoltageCurve};

use super::error::PhmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhmCurveKind {
    ReF,
    #[serde(rename = "charge_qv")]
    ChargeQV,
    #[serde(rename = "charge_ic")]
    ChargeIC,
    #[serde(rename = "charge_dv")]
    ChargeDV,
    #[serde(rename = "discharge_qv")]
    DischargeQV,
    #[serde(rename = "discharge_ic")]
    DischargeIC,
    #[serde(rename = "discharge_dv")]
    DischargeDV,
    #[serde(rename = "relaxation_vt")]
    RelaxationVT,
}

impl PhmCurveKind {
    pub const ALL: [PhmCurveKind; 8] = [
        PhmCurveKind::ReF,
        PhmCurveKind::ChargeQV,
        PhmCurveKind::ChargeIC,
        PhmCurveKind::ChargeDV,
        PhmCurveKind::DischargeQV,
        PhmCurveKind::DischargeIC,
        PhmCurveKind::DischargeDV,
        PhmCurveKind::RelaxationVT,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PhmCurveKind::ReF => "re_f",
            PhmCurveKind::ChargeQV => "charge_qv",
            PhmCurveKind::ChargeIC => "charge_ic",
            PhmCurveKind::ChargeDV => "charge_dv",
            PhmCurveKind::DischargeQV => "discharge_qv",
            PhmCurveKind::DischargeIC => "discharge_ic",
            PhmCurveKind::DischargeDV => "discharge_dv",
            PhmCurveKind::RelaxationVT => "relaxation_vt",
        }
    }

    /// Unit of the curve's axis.
    pub fn axis_unit(&self) -> &'static str {
        match self {
            PhmCurveKind::ReF => "Hz",
            PhmCurveKind::RelaxationVT => "s",
            _ => "V",
        }
    }
}

/// One curve with its physical axis (Hz, V or s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhmCurve {
    pub kind: PhmCurveKind,
    pub axis: Vec<f64>,
    pub values: Vec<f64>,
}

impl PhmCurve {
    fn from_voltage(kind: PhmCurveKind, c: &VoltageCurve) -> Self {
        PhmCurve { kind, axis: c.grid().values(), values: c.values().to_vec() }
    }

    fn from_time(kind: PhmCurveKind, c: &TimeCurve) -> Self {
        PhmCurve { kind, axis: c.grid().values(), values: c.values().to_vec() }
    }

    fn from_spectrum(s: &EisSpectrum) -> Self {
        PhmCurve { kind: PhmCurveKind::ReF, axis: s.grid().as_slice().to_vec(), values: s.re().to_vec() }
    }

    fn same_axis(&self, other: &PhmCurve) -> bool {
        self.axis.len() == other.axis.len()
            && self.axis.iter().zip(&other.axis).all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12))
    }
}

pub type CurveBundle = BTreeMap<PhmCurveKind, PhmCurve>;

fn add_qv(bundle: &mut CurveBundle, qv: &VoltageCurve, kinds: [PhmCurveKind; 3], ic_window: usize) -> Result<(), PhmError> {
    bundle.insert(kinds[0], PhmCurve::from_voltage(kinds[0], qv));
    bundle.insert(kinds[1], PhmCurve::from_voltage(kinds[1], &ic_curve(qv, ic_window)?));
    bundle.insert(kinds[2], PhmCurve::from_voltage(kinds[2], &dv_curve(qv)?));
    Ok(())
}

const CHARGE: [PhmCurveKind; 3] = [PhmCurveKind::ChargeQV, PhmCurveKind::ChargeIC, PhmCurveKind::ChargeDV];
const DISCHARGE: [PhmCurveKind; 3] = [PhmCurveKind::DischargeQV, PhmCurveKind::DischargeIC, PhmCurveKind::DischargeDV];

fn assemble(
    re: Option<&EisSpectrum>,
    charge: Option<&VoltageCurve>,
    discharge: Option<&VoltageCurve>,
    relaxation: Option<&TimeCurve>,
    ic_window: usize,
) -> Result<CurveBundle, PhmError> {
    let mut b = CurveBundle::new();
    if let Some(s) = re {
        b.insert(PhmCurveKind::ReF, PhmCurve::from_spectrum(s));
    }
    if let Some(c) = charge {
        add_qv(&mut b, c, CHARGE, ic_window)?;
    }
    if let Some(c) = discharge {
        add_qv(&mut b, c, DISCHARGE, ic_window)?;
    }
    if let Some(c) = relaxation {
        b.insert(PhmCurveKind::RelaxationVT, PhmCurve::from_time(PhmCurveKind::RelaxationVT, c));
    }
    Ok(b)
}

/// Measured lab curves of one RPT, with IC and DV derived from the Q/V curves.
pub fn measured_bundle(record: &RptRecord, target_soc: f64, ic_window: usize) -> Result<CurveBundle, PhmError> {
    assemble(
        record.lab_spectrum(target_soc),
        record.charge_qv.as_ref(),
        record.discharge_qv.as_ref(),
        record.relaxation.as_ref(),
        ic_window,
    )
}

/// Predicted lab curves, with IC and DV derived from the predicted Q/V curves.
pub fn predicted_bundle(refcurve: &EisSpectrum, curves: &PredictedCurves, ic_window: usize) -> Result<CurveBundle, PhmError> {
    assemble(Some(refcurve), curves.charge_qv.as_ref(), curves.discharge_qv.as_ref(), curves.relaxation.as_ref(), ic_window)
}

/// `current - reference` per kind present in `current`.
pub fn difference_bundle(current: &CurveBundle, reference: &CurveBundle, reference_index: usize) -> Result<CurveBundle, PhmError> {
    let mut out = CurveBundle::new();
    for (kind, c) in current {
        let r = reference.get(kind).ok_or(PhmError::MissingReference(reference_index))?;
        if !c.same_axis(r) {
            return Err(PhmError::GridMismatch(*kind));
        }
        let values = c.values.iter().zip(&r.values).map(|(a, b)| a - b).collect();
        out.insert(*kind, PhmCurve { kind: *kind, axis: c.axis.clone(), values });
    }
    Ok(out)
}

/// Difference of every bundle against the one at position `reference`.
pub fn difference_curves(bundles: &[CurveBundle], reference: usize) -> Result<Vec<CurveBundle>, PhmError> {
    let base = bundles.get(reference).ok_or(PhmError::MissingReference(reference))?;
    bundles.iter().map(|b| difference_bundle(b, base, reference)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::synth::{synth_generate, SynthConfig};

    #[test]
    fn reference_difference_is_zero_and_offsets_are_exact() {
        let cfg = SynthConfig { n_cells: 1, temperatures_c: vec![25.0], ..SynthConfig::desk_default() };
        let cell = &synth_generate(&cfg, 4).unwrap()[0];
        let bundles: Vec<CurveBundle> = cell.records.iter().map(|r| measured_bundle(r, 0.9, 1).unwrap()).collect();
        assert_eq!(bundles[0].len(), 8);
        let diffs = difference_curves(&bundles, 0).unwrap();
        for c in diffs[0].values() {
            assert!(c.values.iter().all(|v| *v == 0.0 || v.is_nan()));
        }
        let second = difference_curves(&bundles, 1).unwrap();
        assert!(second[1].values().all(|c| c.values.iter().all(|v| *v == 0.0 || v.is_nan())));
        assert!(matches!(difference_curves(&bundles, 99), Err(PhmError::MissingReference(99))));
    }

    #[test]
    fn difference_of_affine_family() {
        // curve(t) = base + a(t) * shape
        let axis: Vec<f64> = (0..12).map(|i| 3.0 + 0.1 * i as f64).collect();
        let base: Vec<f64> = axis.iter().map(|v| v.sin()).collect();
        let shape: Vec<f64> = axis.iter().map(|v| v * v).collect();
        let ages = [0.0, 0.25, 0.75];
        let bundles: Vec<CurveBundle> = ages
            .iter()
            .map(|a| {
                let values = base.iter().zip(&shape).map(|(b, s)| b + a * s).collect();
                CurveBundle::from([(PhmCurveKind::ChargeQV, PhmCurve { kind: PhmCurveKind::ChargeQV, axis: axis.clone(), values })])
            })
            .collect();
        let diffs = difference_curves(&bundles, 1).unwrap();
        for (k, a) in ages.iter().enumerate() {
            let d = &diffs[k][&PhmCurveKind::ChargeQV].values;
            for (i, v) in d.iter().enumerate() {
                let expected = (a - 0.25) * shape[i];
                assert!((v - expected).abs() < 1e-12);
            }
        }
    }
}
