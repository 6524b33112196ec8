//! Canonical on-disk dataset layout.
//!
//! ```text
//! <dataset>/cells.json            schema version, cell ids, condition labels
//! <dataset>/<cell_id>/rpt_<k>.csv one file per RPT
//! ```
//!
//! Each RPT file holds three sections, each introduced by a marker row and a
//! column header row:
//!
//! ```text
//! [rpt]
//! key,value
//! rpt_index,0
//! remaining_capacity_ah,3.01
//! days,0
//! cycles,
//! [spectra]
//! spectrum,freq_hz,re_mohm,im_mohm,soc,temp_c,provenance
//! 0,2.08,21.3,-0.8,0.9,25,lab
//! [curves]
//! kind,v_start,v_step,values
//! charge_qv,2.5,0.01,0.02,0.03,...
//! ```
//!
//! Empty cells mean "absent" (`im_mohm`, `days`, `cycles`). Rows of one
//! spectrum share a `spectrum` id and are listed in increasing frequency.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::error::DataError;
use super::types::{
    AgeMarker, CellHistory, EisSpectrum, FrequencyGrid, Provenance, RptRecord, TimeCurve, TimeCurveKind,
    UniformGrid, VoltageCurve, VoltageCurveKind,
};

pub const SCHEMA_VERSION: &str = "1";
pub const CELLS_FILE: &str = "cells.json";

const SPECTRA_HEADER: [&str; 7] = ["spectrum", "freq_hz", "re_mohm", "im_mohm", "soc", "temp_c", "provenance"];
const CURVES_HEADER: [&str; 4] = ["kind", "v_start", "v_step", "values"];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellsIndex {
    schema_version: String,
    cells: Vec<CellEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellEntry {
    cell_id: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

fn valid_cell_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) && id != "." && id != ".."
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// Load every cell of a canonical dataset directory, validating all records.
pub fn load_cells(path: impl AsRef<Path>, schema_version: &str) -> Result<Vec<CellHistory>, DataError> {
    let root = path.as_ref();
    if schema_version != SCHEMA_VERSION {
        return Err(DataError::UnknownSchemaVersion(schema_version.to_string()));
    }
    let index_path = root.join(CELLS_FILE);
    let text = fs::read_to_string(&index_path).map_err(io_err(&index_path))?;
    let index: CellsIndex =
        serde_json::from_str(&text).map_err(|source| DataError::Json { path: index_path.clone(), source })?;
    if index.schema_version != SCHEMA_VERSION {
        return Err(DataError::UnknownSchemaVersion(index.schema_version));
    }

    let mut cells = Vec::with_capacity(index.cells.len());
    for entry in index.cells {
        if !valid_cell_id(&entry.cell_id) {
            return Err(DataError::Parse {
                cell: entry.cell_id.clone(),
                rpt: None,
                detail: "cell id must be non-empty ASCII alphanumerics, '_', '-' or '.'".into(),
            });
        }
        let dir = root.join(&entry.cell_id);
        let mut files: Vec<(u32, PathBuf)> = Vec::new();
        for item in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let item = item.map_err(io_err(&dir))?;
            let name = item.file_name().to_string_lossy().into_owned();
            let Some(stem) = name.strip_prefix("rpt_").and_then(|s| s.strip_suffix(".csv")) else {
                continue;
            };
            let k: u32 = stem.parse().map_err(|_| DataError::Parse {
                cell: entry.cell_id.clone(),
                rpt: None,
                detail: format!("bad rpt file name {name:?}"),
            })?;
            files.push((k, item.path()));
        }
        files.sort();

        let mut records: Vec<RptRecord> = Vec::with_capacity(files.len());
        for (k, file) in files {
            let text = fs::read_to_string(&file).map_err(io_err(&file))?;
            let record = parse_rpt(&entry.cell_id, k, &text)?;
            if records.iter().any(|r| r.rpt_index == record.rpt_index) {
                return Err(DataError::DuplicateRpt { cell: entry.cell_id.clone(), rpt: record.rpt_index });
            }
            records.push(record);
        }
        let cell = CellHistory::new(entry.cell_id.clone(), records, entry.metadata)
            .map_err(|e| DataError::from_validation(&entry.cell_id, None, e))?;
        cells.push(cell);
    }
    Ok(cells)
}

/// Write cells in the canonical layout, replacing any existing files of the
/// same names.
pub fn save_cells(path: impl AsRef<Path>, cells: &[CellHistory]) -> Result<(), DataError> {
    let root = path.as_ref();
    fs::create_dir_all(root).map_err(io_err(root))?;
    let index = CellsIndex {
        schema_version: SCHEMA_VERSION.to_string(),
        cells: cells
            .iter()
            .map(|c| CellEntry { cell_id: c.cell_id.clone(), metadata: c.metadata.clone() })
            .collect(),
    };
    let index_path = root.join(CELLS_FILE);
    let json = serde_json::to_string_pretty(&index).expect("index serializes");
    fs::write(&index_path, json + "\n").map_err(io_err(&index_path))?;

    for cell in cells {
        if !valid_cell_id(&cell.cell_id) {
            return Err(DataError::Parse { cell: cell.cell_id.clone(), rpt: None, detail: "invalid cell id".into() });
        }
        let dir = root.join(&cell.cell_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for r in &cell.records {
            let file = dir.join(format!("rpt_{}.csv", r.rpt_index));
            fs::write(&file, write_rpt(r)).map_err(io_err(&file))?;
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Render one record in the canonical CSV layout.
pub fn write_rpt(r: &RptRecord) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut row = |fields: Vec<String>| w.write_record(&fields).expect("in-memory write");
    row(vec!["[rpt]".into()]);
    row(vec!["key".into(), "value".into()]);
    row(vec!["rpt_index".into(), r.rpt_index.to_string()]);
    row(vec!["remaining_capacity_ah".into(), r.remaining_capacity.to_string()]);
    row(vec!["days".into(), fmt_opt(r.age.days)]);
    row(vec!["cycles".into(), fmt_opt(r.age.cycles)]);

    row(vec!["[spectra]".into()]);
    row(SPECTRA_HEADER.iter().map(|s| s.to_string()).collect());
    for (id, s) in r.lab_spectra.iter().chain(&r.field_spectra).enumerate() {
        for (i, &f) in s.grid().as_slice().iter().enumerate() {
            row(vec![
                id.to_string(),
                f.to_string(),
                s.re()[i].to_string(),
                s.im().map(|im| im[i].to_string()).unwrap_or_default(),
                s.soc().to_string(),
                s.temperature().to_string(),
                s.provenance().as_str().to_string(),
            ]);
        }
    }

    row(vec!["[curves]".into()]);
    row(CURVES_HEADER.iter().map(|s| s.to_string()).collect());
    let mut push_curve = |kind: &str, grid: &UniformGrid, values: &[f64]| {
        let mut fields = vec![kind.to_string(), grid.start().to_string(), grid.step().to_string()];
        fields.extend(values.iter().map(|v| v.to_string()));
        row(fields);
    };
    for c in [&r.charge_qv, &r.discharge_qv].into_iter().flatten() {
        push_curve(c.kind().as_str(), c.grid(), c.values());
    }
    if let Some(c) = &r.relaxation {
        push_curve(c.kind().as_str(), c.grid(), c.values());
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rpt,
    Spectra,
    Curves,
}

struct SpectrumRows {
    freqs: Vec<f64>,
    re: Vec<f64>,
    im: Vec<Option<f64>>,
    soc: f64,
    temp: f64,
    provenance: Provenance,
}

/// Parse one canonical RPT file. `file_index` is the index from the file
/// name and must agree with the `rpt_index` row.
pub fn parse_rpt(cell: &str, file_index: u32, text: &str) -> Result<RptRecord, DataError> {
    let mut rpt = Some(file_index);
    let parse_err = |rpt: Option<u32>, detail: String| DataError::Parse { cell: cell.to_string(), rpt, detail };
    let missing = |rpt: Option<u32>, field: &str| DataError::MissingField {
        cell: cell.to_string(),
        rpt,
        field: field.to_string(),
    };

    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut section = Section::None;
    let mut expect_header = false;
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    let mut spectra: BTreeMap<u32, SpectrumRows> = BTreeMap::new();
    let mut curves: Vec<(String, f64, f64, Vec<f64>)> = Vec::new();

    for (line, result) in reader.records().enumerate() {
        let rec = result.map_err(|e| parse_err(rpt, format!("line {}: {e}", line + 1)))?;
        let fields: Vec<&str> = rec.iter().map(str::trim).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if fields.len() == 1 && fields[0].starts_with('[') {
            section = match fields[0] {
                "[rpt]" => Section::Rpt,
                "[spectra]" => Section::Spectra,
                "[curves]" => Section::Curves,
                other => return Err(parse_err(rpt, format!("unknown section {other}"))),
            };
            expect_header = true;
            continue;
        }
        if expect_header {
            let want: &[&str] = match section {
                Section::Rpt => &["key", "value"],
                Section::Spectra => &SPECTRA_HEADER,
                Section::Curves => &CURVES_HEADER,
                Section::None => &[],
            };
            if fields != want {
                return Err(parse_err(rpt, format!("line {}: expected header {want:?}", line + 1)));
            }
            expect_header = false;
            continue;
        }
        let num = |s: &str, what: &str| -> Result<f64, DataError> {
            if s.is_empty() {
                return Err(missing(rpt, what));
            }
            s.parse::<f64>().map_err(|_| parse_err(rpt, format!("line {}: bad number {s:?} for {what}", line + 1)))
        };
        match section {
            Section::None => return Err(parse_err(rpt, format!("line {}: data outside a section", line + 1))),
            Section::Rpt => {
                if fields.len() != 2 {
                    return Err(parse_err(rpt, format!("line {}: expected key,value", line + 1)));
                }
                kv.insert(fields[0].to_string(), fields[1].to_string());
            }
            Section::Spectra => {
                if fields.len() != SPECTRA_HEADER.len() {
                    return Err(parse_err(rpt, format!("line {}: expected {} spectrum columns", line + 1, SPECTRA_HEADER.len())));
                }
                let id: u32 = fields[0].parse().map_err(|_| parse_err(rpt, format!("line {}: bad spectrum id", line + 1)))?;
                let f = num(fields[1], "freq_hz")?;
                let re = num(fields[2], "re_mohm")?;
                let im = if fields[3].is_empty() { None } else { Some(num(fields[3], "im_mohm")?) };
                let soc = num(fields[4], "soc")?;
                let temp = num(fields[5], "temp_c")?;
                if fields[6].is_empty() {
                    return Err(missing(rpt, "provenance"));
                }
                let provenance: Provenance = fields[6].parse().map_err(|e: String| parse_err(rpt, e))?;
                let entry = spectra.entry(id).or_insert_with(|| SpectrumRows {
                    freqs: Vec::new(),
                    re: Vec::new(),
                    im: Vec::new(),
                    soc,
                    temp,
                    provenance,
                });
                if entry.soc != soc || entry.temp != temp || entry.provenance != provenance {
                    return Err(parse_err(rpt, format!("spectrum {id}: soc/temp/provenance differ between rows")));
                }
                entry.freqs.push(f);
                entry.re.push(re);
                entry.im.push(im);
            }
            Section::Curves => {
                if fields.len() < 3 {
                    return Err(parse_err(rpt, format!("line {}: curve row needs kind, v_start, v_step", line + 1)));
                }
                let start = num(fields[1], "v_start")?;
                let step = num(fields[2], "v_step")?;
                let values = fields[3..]
                    .iter()
                    .map(|s| num(s, "curve value"))
                    .collect::<Result<Vec<_>, _>>()?;
                curves.push((fields[0].to_string(), start, step, values));
            }
        }
    }

    let get = |key: &str| kv.get(key).map(String::as_str).filter(|s| !s.is_empty());
    let index: u32 = get("rpt_index")
        .ok_or_else(|| missing(rpt, "rpt_index"))?
        .parse()
        .map_err(|_| parse_err(rpt, "bad rpt_index".into()))?;
    if index != file_index {
        return Err(parse_err(rpt, format!("rpt_index {index} does not match file name index {file_index}")));
    }
    rpt = Some(index);
    let opt_num = |key: &str| -> Result<Option<f64>, DataError> {
        get(key).map(|s| s.parse::<f64>().map_err(|_| parse_err(rpt, format!("bad {key}")))).transpose()
    };
    let capacity = opt_num("remaining_capacity_ah")?.ok_or_else(|| missing(rpt, "remaining_capacity_ah"))?;
    let age = AgeMarker { days: opt_num("days")?, cycles: opt_num("cycles")? };

    let wrap = |e| DataError::from_validation(cell, rpt, e);
    let mut lab_spectra = Vec::new();
    let mut field_spectra = Vec::new();
    for (id, rows) in spectra {
        let im = match rows.im.iter().filter(|v| v.is_some()).count() {
            0 => None,
            n if n == rows.im.len() => Some(rows.im.iter().map(|v| v.unwrap()).collect()),
            _ => return Err(missing(rpt, &format!("im_mohm (spectrum {id} has partial imaginary data)"))),
        };
        let grid = FrequencyGrid::new(rows.freqs).map_err(wrap)?;
        let s = EisSpectrum::new(grid, rows.re, im, rows.soc, rows.temp, rows.provenance).map_err(wrap)?;
        match s.provenance() {
            Provenance::Lab => lab_spectra.push(s),
            Provenance::Field => field_spectra.push(s),
        }
    }

    let mut charge_qv = None;
    let mut discharge_qv = None;
    let mut relaxation = None;
    for (kind, start, step, values) in curves {
        let grid = UniformGrid::new(start, step, values.len()).map_err(wrap)?;
        let dup = |kind: &str| parse_err(rpt, format!("duplicate curve {kind}"));
        match kind.as_str() {
            "charge_qv" => {
                if charge_qv.is_some() {
                    return Err(dup(&kind));
                }
                charge_qv = Some(VoltageCurve::new(grid, values, VoltageCurveKind::ChargeQV).map_err(wrap)?);
            }
            "discharge_qv" => {
                if discharge_qv.is_some() {
                    return Err(dup(&kind));
                }
                discharge_qv = Some(VoltageCurve::new(grid, values, VoltageCurveKind::DischargeQV).map_err(wrap)?);
            }
            "relaxation_vt" => {
                if relaxation.is_some() {
                    return Err(dup(&kind));
                }
                relaxation = Some(TimeCurve::new(grid, values, TimeCurveKind::RelaxationVT).map_err(wrap)?);
            }
            other => return Err(parse_err(rpt, format!("unknown curve kind {other:?}"))),
        }
    }

    let record = RptRecord {
        cell_id: cell.to_string(),
        rpt_index: index,
        age,
        remaining_capacity: capacity,
        lab_spectra,
        field_spectra,
        charge_qv,
        discharge_qv,
        relaxation,
    };
    record.validate().map_err(wrap)?;
    Ok(record)
}
