use serde::{Deserialize, Serialize};

use crate::bridge::{
    refcurve_pairs, select_preset_frequencies, train_curve_predictors, train_refcurve, train_translation_bank,
    translation_pairs, BankConfig, CurveTarget, PresetFrequencies,
};
use crate::datamodel::{load_cells, split_by_policy, DatasetSplit, EisSpectrum, RptRecord};
use crate::phm::{train_phm, PhmSample, PhmTask};

use super::artifacts::{write, Artifacts, PresetReport};
use super::config::PipelineConfig;
use super::error::PipelineError;
use super::report::{read_csv, summarize, write_csv, TrainMetricRow};
use super::samples::{measured_diagnosis, measured_prognosis, resolve_kinds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Translation,
    Refcurve,
    Curves,
    Phm,
    All,
}

impl Stage {
    pub const ORDER: [Stage; 4] = [Stage::Translation, Stage::Refcurve, Stage::Curves, Stage::Phm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Translation => "translation",
            Stage::Refcurve => "refcurve",
            Stage::Curves => "curves",
            Stage::Phm => "phm",
            Stage::All => "all",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "translation" => Ok(Stage::Translation),
            "refcurve" => Ok(Stage::Refcurve),
            "curves" => Ok(Stage::Curves),
            "phm" => Ok(Stage::Phm),
            "all" => Ok(Stage::All),
            other => Err(PipelineError::Config(format!("unknown stage {other:?}"))),
        }
    }
}

pub fn load_split(cfg: &PipelineConfig) -> Result<DatasetSplit, PipelineError> {
    let cells = load_cells(&cfg.dataset.path, &cfg.dataset.schema_version)?;
    Ok(split_by_policy(cells, cfg.split)?)
}

fn artifacts(cfg: &PipelineConfig) -> Artifacts {
    Artifacts::new(&cfg.out_dir)
}

/// Choose the preset frequencies from the training cells' lab spectra and
/// write `preset_freqs.json`.
pub fn select_freqs(cfg: &PipelineConfig) -> Result<PresetReport, PipelineError> {
    let split = load_split(cfg)?;
    select_freqs_on(cfg, &split)
}

fn select_freqs_on(cfg: &PipelineConfig, split: &DatasetSplit) -> Result<PresetReport, PipelineError> {
    let curves: Vec<EisSpectrum> =
        split.train.iter().flat_map(|c| &c.records).flat_map(|r| r.lab_spectra.iter().cloned()).collect();
    let preset = select_preset_frequencies(&curves, &cfg.preset_options())?;
    log::info!("preset frequencies f1 = {} Hz, f2 = {} Hz from {} curves", preset.f1, preset.f2, curves.len());
    let report = PresetReport::new(preset, curves.len());
    write(&artifacts(cfg).preset(), &report.to_json()?)?;
    Ok(report)
}

fn require_preset(cfg: &PipelineConfig, stage: &'static str) -> Result<PresetFrequencies, PipelineError> {
    let a = artifacts(cfg);
    if !a.preset().exists() {
        return Err(PipelineError::MissingPrerequisite { stage, artifact: a.preset().display().to_string() });
    }
    Ok(a.load_preset()?.preset)
}

fn flat_pairs<'a>(pairs: impl IntoIterator<Item = (&'a [f64], Vec<f64>)>) -> (Vec<f64>, Vec<f64>) {
    let mut y = Vec::new();
    let mut p = Vec::new();
    for (m, q) in pairs {
        y.extend_from_slice(m);
        p.extend(q);
    }
    (y, p)
}

fn train_translation(cfg: &PipelineConfig, split: &DatasetSplit) -> Result<Vec<TrainMetricRow>, PipelineError> {
    let preset = require_preset(cfg, "translation")?;
    let bank_cfg = BankConfig { soc_policy: cfg.soc_policy, re_binning: cfg.re_binning.clone() };
    let opts = cfg.seeded(&cfg.training.translation);
    let mut rows = Vec::new();
    for &soc in &cfg.soc_targets {
        let pairs = translation_pairs(&split.train, &preset, soc)?;
        let bank = train_translation_bank(&pairs, &preset, soc, &bank_cfg, &opts)?;
        write(&artifacts(cfg).bank(soc), &bank.to_json()?)?;
        let used: Vec<_> = pairs.iter().filter(|p| bank.accepts(p.reading.soc)).collect();
        let preds = used.iter().map(|p| bank.predict(&p.reading)).collect::<Result<Vec<_>, _>>()?;
        for (k, name) in ["re1_l", "re2_l"].into_iter().enumerate() {
            let y: Vec<f64> = used.iter().map(|p| p.lab_re[k]).collect();
            let q: Vec<f64> = preds.iter().map(|t| t.re[k]).collect();
            rows.push(TrainMetricRow::new("translation", soc, name, y.len(), summarize(&y, &q)?));
        }
    }
    Ok(rows)
}

fn train_records(split: &DatasetSplit) -> Vec<&RptRecord> {
    split.train.iter().flat_map(|c| &c.records).collect()
}

fn train_refcurves(cfg: &PipelineConfig, split: &DatasetSplit) -> Result<Vec<TrainMetricRow>, PipelineError> {
    let preset = require_preset(cfg, "refcurve")?;
    let opts = cfg.seeded(&cfg.training.refcurve);
    let mut rows = Vec::new();
    for &soc in &cfg.soc_targets {
        let pairs = refcurve_pairs(train_records(split), &preset, soc)?;
        let model = train_refcurve(&pairs, &opts)?;
        write(&artifacts(cfg).refcurve(soc), &model.to_json()?)?;
        let preds =
            pairs.iter().map(|(x, s)| Ok((s.re(), model.predict(x[0], x[1])?.re().to_vec()))).collect::<Result<Vec<_>, PipelineError>>()?;
        let (y, q) = flat_pairs(preds);
        rows.push(TrainMetricRow::new("refcurve", soc, "re_f", pairs.len(), summarize(&y, &q)?));
    }
    Ok(rows)
}

fn measured_curve(r: &RptRecord, target: CurveTarget) -> Option<&[f64]> {
    match target {
        CurveTarget::ChargeQV => r.charge_qv.as_ref().map(|c| c.values()),
        CurveTarget::DischargeQV => r.discharge_qv.as_ref().map(|c| c.values()),
        CurveTarget::RelaxationVT => r.relaxation.as_ref().map(|c| c.values()),
    }
}

fn train_curves(cfg: &PipelineConfig, split: &DatasetSplit) -> Result<Vec<TrainMetricRow>, PipelineError> {
    let opts = cfg.seeded(&cfg.training.curves);
    let records = train_records(split);
    let mut rows = Vec::new();
    for &soc in &cfg.soc_targets {
        let set = train_curve_predictors(&records, soc, &cfg.curve_targets, &opts)?;
        write(&artifacts(cfg).curves(soc), &set.to_json()?)?;
        for m in &set.models {
            let mut pairs = Vec::new();
            for r in &records {
                let (Some(lab), Some(y)) = (r.lab_spectrum(soc), measured_curve(r, m.target)) else { continue };
                pairs.push((y, m.model.predict(lab.re())?));
            }
            let n = pairs.len();
            let (y, q) = flat_pairs(pairs);
            rows.push(TrainMetricRow::new("curves", soc, m.target.as_str(), n, summarize(&y, &q)?));
        }
    }
    Ok(rows)
}

fn fit_metrics(task: PhmTask, soc: f64, samples: &[PhmSample], model: &crate::phm::PhmModel) -> Result<TrainMetricRow, PipelineError> {
    let y: Vec<f64> = samples.iter().map(|s| s.target).collect();
    let q = samples.iter().map(|s| model.predict(&s.curves)).collect::<Result<Vec<_>, _>>()?;
    Ok(TrainMetricRow::new("phm", soc, task.as_str(), y.len(), summarize(&y, &q)?))
}

fn train_phm_stage(cfg: &PipelineConfig, split: &DatasetSplit) -> Result<Vec<TrainMetricRow>, PipelineError> {
    let a = artifacts(cfg);
    for &soc in &cfg.soc_targets {
        for path in [a.refcurve(soc), a.curves(soc)] {
            if !path.exists() {
                return Err(PipelineError::MissingPrerequisite { stage: "phm", artifact: path.display().to_string() });
            }
        }
    }
    let opts = cfg.seeded(&cfg.training.phm);
    let mut rows = Vec::new();
    for &soc in &cfg.soc_targets {
        let kinds = resolve_kinds(cfg, &a.load_curves(soc)?)?;
        let diag = measured_diagnosis(&split.train, soc, cfg, &kinds)?;
        let policy = crate::phm::ReferencePolicy { reference: cfg.diagnosis_reference, early: None };
        let model = train_phm(PhmTask::Diagnosis, &diag, &kinds, policy, None, &opts)?;
        write(&a.phm(PhmTask::Diagnosis, soc), &model.to_json()?)?;
        rows.push(fit_metrics(PhmTask::Diagnosis, soc, &diag, &model)?);

        let prog = measured_prognosis(&split.train, soc, cfg, &kinds)?;
        let model = train_phm(PhmTask::Prognosis, &prog, &kinds, cfg.prognosis.policy(), Some(cfg.prognosis.unit), &opts)?;
        write(&a.phm(PhmTask::Prognosis, soc), &model.to_json()?)?;
        rows.push(fit_metrics(PhmTask::Prognosis, soc, &prog, &model)?);
    }
    Ok(rows)
}

/// Replace the rows of `stages` in `metrics_train.csv`, keeping the rest.
fn merge_metrics(cfg: &PipelineConfig, stages: &[Stage], fresh: Vec<TrainMetricRow>) -> Result<Vec<TrainMetricRow>, PipelineError> {
    let path = artifacts(cfg).metrics_train();
    let mut rows: Vec<TrainMetricRow> = if path.exists() { read_csv(&path)? } else { Vec::new() };
    rows.retain(|r| !stages.iter().any(|s| s.as_str() == r.stage));
    rows.extend(fresh);
    let rank = |r: &TrainMetricRow| Stage::ORDER.iter().position(|s| s.as_str() == r.stage).unwrap_or(usize::MAX);
    rows.sort_by_key(rank);
    write_csv(&path, &rows)?;
    Ok(rows)
}

/// Train one stage, or every stage after frequency selection. Returns the
/// full training metrics table.
pub fn train(cfg: &PipelineConfig, stage: Stage) -> Result<Vec<TrainMetricRow>, PipelineError> {
    let split = load_split(cfg)?;
    let stages: Vec<Stage> = if stage == Stage::All { Stage::ORDER.to_vec() } else { vec![stage] };
    if stage == Stage::All {
        select_freqs_on(cfg, &split)?;
    }
    let mut fresh = Vec::new();
    for s in &stages {
        log::info!("training stage {}", s.as_str());
        fresh.extend(match s {
            Stage::Translation => train_translation(cfg, &split)?,
            Stage::Refcurve => train_refcurves(cfg, &split)?,
            Stage::Curves => train_curves(cfg, &split)?,
            Stage::Phm => train_phm_stage(cfg, &split)?,
            Stage::All => unreachable!(),
        });
    }
    merge_metrics(cfg, &stages, fresh)
}
