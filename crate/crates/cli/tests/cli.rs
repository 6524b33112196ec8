use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use labbridge::datamodel::load_cells;
use labbridge::pipeline::{EvalRow, PointRow};
use serde_json::{json, Value};

fn labbridge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labbridge")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Synthetic dataset plus a config next to it; returns the config path.
fn setup(dir: &Path, extra: Value) -> String {
    ok(&labbridge(&["synth-gen", "--out", dir.join("data").to_str().unwrap(), "--seed", "4"]));
    let mut doc = json!({"preset": "synthetic", "dataset": {"path": "data"}, "seed": 9, "out_dir": "out"});
    for (k, v) in extra.as_object().unwrap() {
        doc[k] = v.clone();
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn memorizing() -> Value {
    let h = json!({"hyperparams": {"n_estimators": 1, "max_depth": null, "min_samples_leaf": 1,
        "max_features": {"fraction": 1.0}, "subsample": 1.0, "bootstrap": false}, "grid": null});
    json!({"training": {"translation": h, "refcurve": h, "curves": h, "phm": h}})
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn full_run_writes_every_artifact_and_consistent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({"plots": true}));
    ok(&labbridge(&["train", "--config", &cfg, "--stage", "all", "--threads", "2"]));
    let out = dir.path().join("out");
    for name in [
        "preset_freqs.json",
        "metrics_train.csv",
        "translation_bank_soc50.json",
        "translation_bank_soc90.json",
        "refcurve_soc90.json",
        "curves_soc90.json",
        "phm_diagnosis_soc90.json",
        "phm_prognosis_soc90.json",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let stdout = ok(&labbridge(&["evaluate", "--config", &cfg, "--split", "test"]));
    assert!(stdout.starts_with("step,lab_data,mae,rmse,mape\n"));

    let table = fs::read_to_string(out.join("eval_test.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "step,lab_data,mae,rmse,mape");
    let rows: Vec<EvalRow> = csv::Reader::from_path(out.join("eval_test.csv")).unwrap().deserialize().map(Result::unwrap).collect();
    let points: Vec<PointRow> =
        csv::Reader::from_path(out.join("eval_points_test.csv")).unwrap().deserialize().map(Result::unwrap).collect();
    for step in ["step2", "step3", "step4", "step5"] {
        assert!(rows.iter().any(|r| r.step == step), "{step} missing");
    }
    for r in &rows {
        let pairs: Vec<(f64, f64)> =
            points.iter().filter(|p| p.step == r.step && p.lab_data == r.lab_data).map(|p| (p.measured, p.predicted)).collect();
        let n = pairs.len() as f64;
        let mae = pairs.iter().map(|(m, p)| (m - p).abs()).sum::<f64>() / n;
        let rmse = (pairs.iter().map(|(m, p)| (m - p).powi(2)).sum::<f64>() / n).sqrt();
        let mape = 100.0 * pairs.iter().map(|(m, p)| ((m - p) / m).abs()).sum::<f64>() / n;
        assert!((mae - r.mae).abs() <= 1e-12 * mae.max(1.0), "{} mae", r.lab_data);
        assert!((rmse - r.rmse).abs() <= 1e-12 * rmse.max(1.0), "{} rmse", r.lab_data);
        assert!((mape - r.mape.unwrap()).abs() <= 1e-9 * mape.max(1.0), "{} mape", r.lab_data);
    }
    let plots = out.join("plots_test");
    assert!(plots.join("scatter_diagnosis_measured_soc90.svg").is_file());
    assert!(plots.join("overlay_charge_qv_soc90.svg").is_file());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({}));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&labbridge(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]));
        ok(&labbridge(&["evaluate", "--config", &cfg, "--out", out.to_str().unwrap(), "--split", "test"]));
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs");
    }
    let s1 = ok(&labbridge(&["select-freqs", "--config", &cfg, "--out", a.to_str().unwrap()]));
    let s2 = ok(&labbridge(&["select-freqs", "--config", &cfg, "--out", a.to_str().unwrap()]));
    assert_eq!(s1, s2);
    assert_eq!(fs::read(a.join("preset_freqs.json")).unwrap(), fs::read(b.join("preset_freqs.json")).unwrap());
}

#[test]
fn memorized_training_reading_recovers_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), memorizing());
    ok(&labbridge(&["train", "--config", &cfg]));
    let preset: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/preset_freqs.json")).unwrap()).unwrap();
    let (f1, f2) = (preset["preset"]["f1"].as_f64().unwrap(), preset["preset"]["f2"].as_f64().unwrap());
    let cells = load_cells(dir.path().join("data"), "1").unwrap();
    let cell = &cells[0];
    let arg = |rec: usize| {
        let s = &cell.records[rec].field_spectra[2];
        format!("{},{},{},{}", s.re_at(f1).unwrap(), s.re_at(f2).unwrap(), s.soc(), s.temperature())
    };
    let args = ["diagnose", "--config", &cfg, "--reading", &arg(6), "--reference", &arg(0)];
    let first = ok(&labbridge(&args));
    let doc: Value = serde_json::from_str(&first).unwrap();
    let want = cell.records[6].remaining_capacity;
    for p in doc["predictions"].as_array().unwrap() {
        assert_eq!(p["value"].as_f64().unwrap(), want);
    }
    assert_eq!(doc["flags"].as_array().unwrap().len(), 0);
    assert_eq!(ok(&labbridge(&args)), first);

    let prog = ok(&labbridge(&["prognose", "--config", &cfg, "--reading", &arg(2), "--reference", &arg(0)]));
    let doc: Value = serde_json::from_str(&prog).unwrap();
    assert_eq!(doc["unit"], "days");
    assert!(doc["predictions"][0]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn out_of_range_reading_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({}));
    ok(&labbridge(&["train", "--config", &cfg]));
    let out = ok(&labbridge(&["diagnose", "--config", &cfg, "--reading", "500,400,0.5,25", "--reference", "20,16,0.5,25"]));
    let doc: Value = serde_json::from_str(&out).unwrap();
    let flags: Vec<&str> = doc["flags"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(flags.contains(&"soc90/current/f1/re_out_of_range"), "{flags:?}");
    assert!(doc["predictions"][0]["current"]["flags"][0]["re_out_of_range"].as_bool().unwrap());
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({}));

    let missing = dir.path().join("nodata.json");
    fs::write(&missing, r#"{"preset": "synthetic", "dataset": {"path": "absent"}, "seed": 1, "out_dir": "o"}"#).unwrap();
    let out = labbridge(&["select-freqs", "--config", missing.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    let out = labbridge(&["train", "--config", &cfg, "--stage", "phm"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("refcurve"));

    let out = labbridge(&["evaluate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(4));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"preset": "synthetic", "dataset": {"path": "data"}, "out_dir": "o"}"#).unwrap();
    assert_eq!(labbridge(&["select-freqs", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(labbridge(&["train", "--config", &cfg, "--stage", "bogus"]).status.code(), Some(2));

    ok(&labbridge(&["train", "--config", &cfg]));
    let out = labbridge(&["diagnose", "--config", &cfg, "--reading", "20,16,1.5", "--reference", "20,16,0.5,25"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn staged_training_matches_all() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({}));
    let staged = dir.path().join("staged");
    let s = staged.to_str().unwrap();
    ok(&labbridge(&["select-freqs", "--config", &cfg, "--out", s]));
    for stage in ["translation", "refcurve", "curves", "phm"] {
        ok(&labbridge(&["train", "--config", &cfg, "--out", s, "--stage", stage]));
    }
    let whole = dir.path().join("whole");
    ok(&labbridge(&["train", "--config", &cfg, "--out", whole.to_str().unwrap()]));
    assert_eq!(files(&staged), files(&whole));
}
