//! Single-battery diagnosis and prognosis from field readings.

use serde::Serialize;

use crate::bridge::{soc_bin, BinFlags, BridgeError, FieldReading};
use crate::datamodel::AgeUnit;
use crate::phm::{CurveBundle, PhmTask};

use super::artifacts::Artifacts;
use super::config::{soc_tag, PipelineConfig};
use super::error::PipelineError;
use super::evaluate::load_chain;
use super::samples::ChainOutput;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub kind: &'static str,
    pub len: usize,
    pub first: f64,
    pub last: f64,
    pub min: f64,
    pub max: f64,
}

fn summaries(bundle: &CurveBundle) -> Vec<CurveSummary> {
    bundle
        .values()
        .map(|c| {
            let finite = c.values.iter().copied().filter(|v| v.is_finite());
            CurveSummary {
                kind: c.kind.as_str(),
                len: c.values.len(),
                first: c.values[0],
                last: c.values[c.values.len() - 1],
                min: finite.clone().fold(f64::INFINITY, f64::min),
                max: finite.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutedReading {
    /// Predicted Re^L at (f1, f2), mΩ.
    pub lab_re: [f64; 2],
    pub flags: [BinFlags; 2],
    pub curves: Vec<CurveSummary>,
}

impl RoutedReading {
    fn new(out: &ChainOutput) -> Self {
        RoutedReading { lab_re: out.translation.re, flags: out.translation.flags, curves: summaries(&out.bundle) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SocPrediction {
    pub target_soc: f64,
    pub current: RoutedReading,
    pub reference: RoutedReading,
    /// Remaining capacity (Ah) or remaining life in `unit`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inference {
    pub task: PhmTask,
    pub unit: Option<AgeUnit>,
    pub predictions: Vec<SocPrediction>,
    /// Every raised routing flag, as `soc90/current/f1/re_out_of_range`.
    pub flags: Vec<String>,
}

impl Inference {
    pub fn to_json(&self) -> Result<String, PipelineError> {
        serde_json::to_string_pretty(self).map_err(|e| PipelineError::Report(e.to_string()))
    }
}

fn flag_names(prefix: &str, flags: &[BinFlags; 2], out: &mut Vec<String>) {
    for (role, f) in ["f1", "f2"].iter().zip(flags) {
        for (set, name) in [(f.soc_out_of_range, "soc_out_of_range"), (f.re_out_of_range, "re_out_of_range"), (f.fallback, "fallback")] {
            if set {
                out.push(format!("{prefix}/{role}/{name}"));
            }
        }
    }
}

/// Run `task` for a battery whose current and reference readings are
/// given. Every lab-SOC model family accepting the current SOC answers.
pub fn infer(cfg: &PipelineConfig, task: PhmTask, current: FieldReading, reference: FieldReading) -> Result<Inference, PipelineError> {
    let a = Artifacts::new(&cfg.out_dir);
    let mut predictions = Vec::new();
    let mut flags = Vec::new();
    let mut unit = None;
    for &soc in &cfg.soc_targets {
        let chain = load_chain(&a, soc)?;
        if !chain.bank.accepts(current.soc) {
            continue;
        }
        let model = a.load_phm(task, soc)?;
        unit = model.unit;
        let kinds = model.kinds();
        let cur = chain.run(&current, cfg.ic_window)?;
        let base = chain.run(&reference, cfg.ic_window)?;
        let curves = chain.difference(&current, &reference, &kinds, cfg.ic_window, model.policy.reference)?;
        let value = model.predict(&curves)?;
        let tag = soc_tag(soc);
        flag_names(&format!("{tag}/current"), &cur.translation.flags, &mut flags);
        flag_names(&format!("{tag}/reference"), &base.translation.flags, &mut flags);
        predictions.push(SocPrediction { target_soc: soc, current: RoutedReading::new(&cur), reference: RoutedReading::new(&base), value });
    }
    if predictions.is_empty() {
        return Err(BridgeError::NoModelAvailable { soc_bin: soc_bin(current.soc).0 }.into());
    }
    Ok(Inference { task, unit, predictions, flags })
}
