use serde::{Deserialize, Serialize};

use crate::analytics::{dv_curve, ic_curve, relaxation_derivative};
use crate::bridge::{same_soc, CurveTarget};
use crate::datamodel::{CellHistory, RptRecord, TimeCurve, VoltageCurve};
use crate::phm::{PhmModel, PhmSample, PhmTask};

use super::artifacts::{write, Artifacts};
use super::config::{soc_tag, PipelineConfig};
use super::error::PipelineError;
use super::report::{summarize, write_csv, EvalRow, PointRow};
use super::samples::{measured_diagnosis, measured_prognosis, predicted_diagnosis, predicted_prognosis, Chain, ChannelSample};
use super::svg;
use super::train::load_split;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Test,
}

impl SplitName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Test => "test",
        }
    }
}

impl std::str::FromStr for SplitName {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitName::Train),
            "test" => Ok(SplitName::Test),
            other => Err(PipelineError::Config(format!("unknown split {other:?}"))),
        }
    }
}

struct Series {
    step: &'static str,
    lab_data: String,
    axis_label: &'static str,
    points: Vec<PointRow>,
    example: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

#[derive(Default)]
struct Collector {
    series: Vec<Series>,
}

impl Collector {
    fn series(&mut self, step: &'static str, lab_data: String, axis_label: &'static str) -> &mut Series {
        if let Some(i) = self.series.iter().position(|s| s.step == step && s.lab_data == lab_data) {
            return &mut self.series[i];
        }
        self.series.push(Series { step, lab_data, axis_label, points: Vec::new(), example: None });
        self.series.last_mut().unwrap()
    }
}

impl Series {
    /// Pairs where either side is masked (NaN) are skipped.
    fn push(&mut self, cell: &str, rpt: u32, channel: Option<usize>, measured: &[f64], predicted: &[f64]) {
        for (point, (&m, &p)) in measured.iter().zip(predicted).enumerate() {
            if m.is_finite() && p.is_finite() {
                self.points.push(PointRow {
                    step: self.step.to_string(),
                    lab_data: self.lab_data.clone(),
                    cell_id: cell.to_string(),
                    rpt_index: rpt,
                    channel,
                    point,
                    measured: m,
                    predicted: p,
                });
            }
        }
    }

    fn push_curve(&mut self, cell: &str, rpt: u32, axis: Vec<f64>, measured: &[f64], predicted: &[f64]) {
        self.push(cell, rpt, None, measured, predicted);
        if self.example.is_none() {
            self.example = Some((axis, measured.to_vec(), predicted.to_vec()));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub points: Vec<PointRow>,
}

impl EvalReport {
    pub fn row(&self, step: &str, lab_data: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.step == step && r.lab_data == lab_data)
    }
}

fn label(name: &str, soc: f64) -> String {
    format!("{name}@{}", soc_tag(soc))
}

fn voltage(r: &RptRecord, t: CurveTarget) -> Option<&VoltageCurve> {
    match t {
        CurveTarget::ChargeQV => r.charge_qv.as_ref(),
        CurveTarget::DischargeQV => r.discharge_qv.as_ref(),
        CurveTarget::RelaxationVT => None,
    }
}

fn step2(c: &mut Collector, cells: &[CellHistory], chain: &Chain, soc: f64) -> Result<(), PipelineError> {
    for cell in cells {
        for r in &cell.records {
            let Some(lab) = r.lab_spectrum(soc) else { continue };
            let p = &chain.bank.preset;
            let lab_re = [crate::bridge::re_at(lab, p.f1)?, crate::bridge::re_at(lab, p.f2)?];
            for (ch, field) in r.field_spectra.iter().enumerate() {
                if !chain.bank.accepts(field.soc()) {
                    continue;
                }
                let t = chain.bank.predict(&chain.reading(field)?)?;
                for (k, name) in ["re1_l", "re2_l"].into_iter().enumerate() {
                    c.series("step2", label(name, soc), "").push(&cell.cell_id, r.rpt_index, Some(ch), &[lab_re[k]], &[t.re[k]]);
                }
            }
        }
    }
    Ok(())
}

fn step3_4(c: &mut Collector, cells: &[CellHistory], chain: &Chain, soc: f64, ic_window: usize) -> Result<(), PipelineError> {
    let p = &chain.bank.preset;
    for cell in cells {
        for r in &cell.records {
            let Some(lab) = r.lab_spectrum(soc) else { continue };
            let id = &cell.cell_id;
            let (re1, re2) = (crate::bridge::re_at(lab, p.f1)?, crate::bridge::re_at(lab, p.f2)?);
            let rc = chain.refcurve.predict(re1, re2)?;
            c.series("step3", label("re_f", soc), "Hz").push_curve(id, r.rpt_index, lab.grid().as_slice().to_vec(), lab.re(), rc.re());

            let pred = chain.curves.predict(lab)?;
            for (t, pc) in [(CurveTarget::ChargeQV, &pred.charge_qv), (CurveTarget::DischargeQV, &pred.discharge_qv)] {
                let (Some(m), Some(q)) = (voltage(r, t), pc.as_ref()) else { continue };
                c.series("step4", label(t.as_str(), soc), "V").push_curve(id, r.rpt_index, m.grid().values(), m.values(), q.values());
                let (mi, qi) = (ic_curve(m, ic_window)?, ic_curve(q, ic_window)?);
                let ic_name = if t == CurveTarget::ChargeQV { "charge_ic" } else { "discharge_ic" };
                c.series("step4", label(ic_name, soc), "V").push_curve(id, r.rpt_index, mi.grid().values(), mi.values(), qi.values());
                let (md, qd) = (dv_curve(m)?, dv_curve(q)?);
                let dv_name = if t == CurveTarget::ChargeQV { "charge_dv" } else { "discharge_dv" };
                c.series("step4", label(dv_name, soc), "V").push_curve(id, r.rpt_index, md.grid().values(), md.values(), qd.values());
            }
            if let (Some(m), Some(q)) = (r.relaxation.as_ref(), pred.relaxation.as_ref()) {
                c.series("step4", label("relaxation_vt", soc), "s").push_curve(id, r.rpt_index, m.grid().values(), m.values(), q.values());
                let (md, qd): (TimeCurve, TimeCurve) = (relaxation_derivative(m)?, relaxation_derivative(q)?);
                c.series("step4", label("relaxation_dvdt", soc), "s").push_curve(
                    id,
                    r.rpt_index,
                    md.grid().values(),
                    md.values(),
                    qd.values(),
                );
            }
        }
    }
    Ok(())
}

fn push_measured(c: &mut Collector, name: String, model: &PhmModel, samples: &[PhmSample]) -> Result<(), PipelineError> {
    let s = c.series("step5", name, "");
    for x in samples {
        s.push(&x.cell_id, x.rpt_index, None, &[x.target], &[model.predict(&x.curves)?]);
    }
    Ok(())
}

fn push_predicted(c: &mut Collector, name: String, model: &PhmModel, samples: &[ChannelSample]) -> Result<(), PipelineError> {
    let s = c.series("step5", name, "");
    for (ch, x) in samples {
        s.push(&x.cell_id, x.rpt_index, Some(*ch), &[x.target], &[model.predict(&x.curves)?]);
    }
    Ok(())
}

fn step5(c: &mut Collector, cells: &[CellHistory], chain: &Chain, a: &Artifacts, soc: f64, cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let diag = a.load_phm(PhmTask::Diagnosis, soc)?;
    let prog = a.load_phm(PhmTask::Prognosis, soc)?;
    push_measured(c, label("diagnosis_measured", soc), &diag, &measured_diagnosis(cells, soc, cfg, &diag.kinds())?)?;
    push_predicted(c, label("diagnosis_predicted", soc), &diag, &predicted_diagnosis(cells, chain, cfg, &diag.kinds())?)?;
    push_measured(c, label("prognosis_measured", soc), &prog, &measured_prognosis(cells, soc, cfg, &prog.kinds())?)?;
    push_predicted(c, label("prognosis_predicted", soc), &prog, &predicted_prognosis(cells, chain, cfg, &prog.kinds())?)?;
    Ok(())
}

pub fn load_chain(a: &Artifacts, soc: f64) -> Result<Chain, PipelineError> {
    let chain = Chain { bank: a.load_bank(soc)?, refcurve: a.load_refcurve(soc)?, curves: a.load_curves(soc)? };
    if !same_soc(chain.bank.target_soc, soc) || !same_soc(chain.refcurve.target_soc, soc) || !same_soc(chain.curves.target_soc, soc) {
        return Err(PipelineError::Report(format!("artifacts for {} disagree on the lab SOC", soc_tag(soc))));
    }
    Ok(chain)
}

fn file_stem(lab_data: &str) -> String {
    lab_data.replace('@', "_")
}

/// Score every step on one split, write `eval_<split>.csv`,
/// `eval_points_<split>.csv` and, when enabled, SVG plots.
pub fn evaluate(cfg: &PipelineConfig, split: SplitName) -> Result<EvalReport, PipelineError> {
    let a = Artifacts::new(&cfg.out_dir);
    let chains: Vec<(f64, Chain)> = cfg.soc_targets.iter().map(|&s| Ok((s, load_chain(&a, s)?))).collect::<Result<_, PipelineError>>()?;
    for &soc in &cfg.soc_targets {
        for task in [PhmTask::Diagnosis, PhmTask::Prognosis] {
            if !a.phm(task, soc).exists() {
                return Err(PipelineError::MissingArtifact(a.phm(task, soc)));
            }
        }
    }
    let data = load_split(cfg)?;
    let cells = match split {
        SplitName::Train => &data.train,
        SplitName::Test => &data.test,
    };
    let mut c = Collector::default();
    for (soc, chain) in &chains {
        step2(&mut c, cells, chain, *soc)?;
    }
    for (soc, chain) in &chains {
        step3_4(&mut c, cells, chain, *soc, cfg.ic_window)?;
    }
    for (soc, chain) in &chains {
        step5(&mut c, cells, chain, &a, *soc, cfg)?;
    }

    let mut rows = Vec::new();
    let mut points = Vec::new();
    for s in &c.series {
        if s.points.is_empty() {
            log::warn!("{} {}: no pairs to score", s.step, s.lab_data);
            continue;
        }
        let m: Vec<f64> = s.points.iter().map(|p| p.measured).collect();
        let q: Vec<f64> = s.points.iter().map(|p| p.predicted).collect();
        let e = summarize(&m, &q)?;
        rows.push(EvalRow { step: s.step.to_string(), lab_data: s.lab_data.clone(), mae: e.mae, rmse: e.rmse, mape: e.mape });
        points.extend(s.points.iter().cloned());
    }
    write_csv(&a.eval(split.as_str()), &rows)?;
    write_csv(&a.eval_points(split.as_str()), &points)?;
    if cfg.plots {
        let dir = a.plots(split.as_str());
        for s in c.series.iter().filter(|s| !s.points.is_empty()) {
            let title = format!("{} {}", s.step, s.lab_data);
            let pairs: Vec<(f64, f64)> = s.points.iter().map(|p| (p.measured, p.predicted)).collect();
            write(&dir.join(format!("scatter_{}.svg", file_stem(&s.lab_data))), &svg::scatter(&title, &pairs))?;
            if let Some((x, m, q)) = &s.example {
                write(&dir.join(format!("overlay_{}.svg", file_stem(&s.lab_data))), &svg::overlay(&title, s.axis_label, x, m, q))?;
            }
        }
    }
    Ok(EvalReport { rows, points })
}
