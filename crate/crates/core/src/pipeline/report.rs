use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mlcore::{mae, mape, rmse, MlError};

use super::error::PipelineError;

/// MAE, RMSE and MAPE (percent) of one series. MAPE is absent when a
/// reference value is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mape: Option<f64>,
}

pub fn summarize(measured: &[f64], predicted: &[f64]) -> Result<ErrorSummary, MlError> {
    let mape = match mape(measured, predicted) {
        Ok(v) => Some(v),
        Err(MlError::ZeroReference(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ErrorSummary { n: measured.len(), mae: mae(measured, predicted)?, rmse: rmse(measured, predicted)?, mape })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetricRow {
    pub stage: String,
    pub target_soc: f64,
    pub quantity: String,
    pub n_samples: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mape: Option<f64>,
}

impl TrainMetricRow {
    pub fn new(stage: &str, target_soc: f64, quantity: &str, n_samples: usize, s: ErrorSummary) -> Self {
        TrainMetricRow {
            stage: stage.into(),
            target_soc,
            quantity: quantity.into(),
            n_samples,
            mae: s.mae,
            rmse: s.rmse,
            mape: s.mape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub step: String,
    pub lab_data: String,
    pub mae: f64,
    pub rmse: f64,
    pub mape: Option<f64>,
}

/// One measured/predicted pair behind an [`EvalRow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub step: String,
    pub lab_data: String,
    pub cell_id: String,
    pub rpt_index: u32,
    /// Index of the field spectrum the prediction started from.
    pub channel: Option<usize>,
    pub point: usize,
    pub measured: f64,
    pub predicted: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| PipelineError::Report(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::Report(e.to_string()))?;
    super::artifacts::write(path, &String::from_utf8_lossy(&bytes))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = super::artifacts::read(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| PipelineError::Report(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reference_blanks_mape_only() {
        let s = summarize(&[0.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(s.mape, None);
        assert_eq!(s.mae, 0.5);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let rows = vec![
            EvalRow { step: "step2".into(), lab_data: "re1_l@soc90".into(), mae: 0.1, rmse: 0.2, mape: Some(1.0 / 3.0) },
            EvalRow { step: "step3".into(), lab_data: "re_f@soc90".into(), mae: 0.0, rmse: 0.0, mape: None },
        ];
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step,lab_data,mae,rmse,mape\n"));
        assert_eq!(read_csv::<EvalRow>(&path).unwrap(), rows);
    }
}
