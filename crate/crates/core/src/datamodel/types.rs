use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::error::ValidationError;

/// Relative tolerance used when matching a requested frequency or SOC
/// against stored values.
pub const MATCH_RTOL: f64 = 1e-9;

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= MATCH_RTOL * a.abs().max(b.abs()).max(1e-12)
}

/// Strictly increasing, positive frequency axis in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid(Vec<f64>);

impl FrequencyGrid {
    pub fn new(frequencies: Vec<f64>) -> Result<Self, ValidationError> {
        if frequencies.len() < 2 {
            return Err(ValidationError::GridTooShort { len: frequencies.len() });
        }
        for (i, &f) in frequencies.iter().enumerate() {
            if !f.is_finite() || f <= 0.0 {
                return Err(ValidationError::NonPositiveFrequency { index: i, value: f });
            }
            if i > 0 && f <= frequencies[i - 1] {
                return Err(ValidationError::NonMonotonicGrid { index: i });
            }
        }
        Ok(Self(frequencies))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the grid point matching `f` within [`MATCH_RTOL`].
    pub fn position(&self, f: f64) -> Option<usize> {
        self.0.iter().position(|&g| approx_eq(g, f))
    }

    /// Same points within [`MATCH_RTOL`].
    pub fn matches(&self, other: &FrequencyGrid) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(&a, &b)| approx_eq(a, b))
    }
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = ValidationError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.0
    }
}

/// A uniform axis defined by `(start, step, count)`. The count is
/// authoritative: point `i` sits at `start + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUniformGrid", into = "RawUniformGrid")]
pub struct UniformGrid {
    start: f64,
    step: f64,
    count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUniformGrid {
    start: f64,
    step: f64,
    count: usize,
}

impl TryFrom<RawUniformGrid> for UniformGrid {
    type Error = ValidationError;

    fn try_from(r: RawUniformGrid) -> Result<Self, Self::Error> {
        UniformGrid::new(r.start, r.step, r.count)
    }
}

impl From<UniformGrid> for RawUniformGrid {
    fn from(g: UniformGrid) -> Self {
        RawUniformGrid { start: g.start, step: g.step, count: g.count }
    }
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self, ValidationError> {
        if !start.is_finite() {
            return Err(ValidationError::NonFinite { what: "grid start" });
        }
        if !step.is_finite() || step <= 0.0 {
            return Err(ValidationError::NonPositiveStep(step));
        }
        if count < 2 {
            return Err(ValidationError::GridTooShort { len: count });
        }
        Ok(Self { start, step, count })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.value(self.count - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }

    /// The grid with its first point dropped, as produced by first differences.
    pub fn shifted(&self) -> Result<Self, ValidationError> {
        Self::new(self.value(1), self.step, self.count - 1)
    }

    pub fn matches(&self, other: &UniformGrid) -> bool {
        self.count == other.count && approx_eq(self.start, other.start) && approx_eq(self.step, other.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Field,
    Lab,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Field => "field",
            Provenance::Lab => "lab",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "field" => Ok(Provenance::Field),
            "lab" => Ok(Provenance::Lab),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

/// Impedance spectrum; `re` and `im` are in mΩ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EisSpectrum {
    grid: FrequencyGrid,
    re: Vec<f64>,
    im: Option<Vec<f64>>,
    soc: f64,
    temperature: f64,
    provenance: Provenance,
}

impl EisSpectrum {
    pub fn new(
        grid: FrequencyGrid,
        re: Vec<f64>,
        im: Option<Vec<f64>>,
        soc: f64,
        temperature: f64,
        provenance: Provenance,
    ) -> Result<Self, ValidationError> {
        if re.len() != grid.len() {
            return Err(ValidationError::LengthMismatch { what: "re", expected: grid.len(), found: re.len() });
        }
        if let Some(im) = &im {
            if im.len() != grid.len() {
                return Err(ValidationError::LengthMismatch { what: "im", expected: grid.len(), found: im.len() });
            }
            if im.iter().any(|v| !v.is_finite()) {
                return Err(ValidationError::NonFinite { what: "im" });
            }
        }
        if re.iter().any(|v| !v.is_finite()) {
            return Err(ValidationError::NonFinite { what: "re" });
        }
        if !(0.0..=1.0).contains(&soc) {
            return Err(ValidationError::SocOutOfRange(soc));
        }
        if !temperature.is_finite() {
            return Err(ValidationError::NonFinite { what: "temperature" });
        }
        Ok(Self { grid, re, im, soc, temperature, provenance })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> Option<&[f64]> {
        self.im.as_deref()
    }

    pub fn soc(&self) -> f64 {
        self.soc
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Real impedance at a grid frequency.
    pub fn re_at(&self, f: f64) -> Option<f64> {
        self.grid.position(f).map(|i| self.re[i])
    }

    /// Copy of this spectrum with the real part replaced.
    pub fn with_re(&self, re: Vec<f64>) -> Result<Self, ValidationError> {
        Self::new(self.grid.clone(), re, self.im.clone(), self.soc, self.temperature, self.provenance)
    }

    pub fn with_im(&self, im: Option<Vec<f64>>) -> Result<Self, ValidationError> {
        Self::new(self.grid.clone(), self.re.clone(), im, self.soc, self.temperature, self.provenance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoltageCurveKind {
    #[serde(rename = "charge_qv")]
    ChargeQV,
    #[serde(rename = "discharge_qv")]
    DischargeQV,
    #[serde(rename = "charge_ic")]
    ChargeIC,
    #[serde(rename = "charge_dv")]
    ChargeDV,
    #[serde(rename = "discharge_ic")]
    DischargeIC,
    #[serde(rename = "discharge_dv")]
    DischargeDV,
}

impl VoltageCurveKind {
    pub const ALL: [VoltageCurveKind; 6] = [
        VoltageCurveKind::ChargeQV,
        VoltageCurveKind::DischargeQV,
        VoltageCurveKind::ChargeIC,
        VoltageCurveKind::ChargeDV,
        VoltageCurveKind::DischargeIC,
        VoltageCurveKind::DischargeDV,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VoltageCurveKind::ChargeQV => "charge_qv",
            VoltageCurveKind::DischargeQV => "discharge_qv",
            VoltageCurveKind::ChargeIC => "charge_ic",
            VoltageCurveKind::ChargeDV => "charge_dv",
            VoltageCurveKind::DischargeIC => "discharge_ic",
            VoltageCurveKind::DischargeDV => "discharge_dv",
        }
    }

    pub fn is_qv(&self) -> bool {
        matches!(self, VoltageCurveKind::ChargeQV | VoltageCurveKind::DischargeQV)
    }

    fn allows_masked(&self) -> bool {
        matches!(self, VoltageCurveKind::ChargeDV | VoltageCurveKind::DischargeDV)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeCurveKind {
    #[serde(rename = "relaxation_vt")]
    RelaxationVT,
    #[serde(rename = "relaxation_dvdt")]
    RelaxationDVDT,
}

impl TimeCurveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TimeCurveKind::RelaxationVT => "relaxation_vt",
            TimeCurveKind::RelaxationDVDT => "relaxation_dvdt",
        }
    }
}

/// Values on a uniform voltage grid. Masked points of DV curves are stored
/// as NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoltageCurve {
    grid: UniformGrid,
    values: Vec<f64>,
    kind: VoltageCurveKind,
}

impl VoltageCurve {
    pub fn new(grid: UniformGrid, values: Vec<f64>, kind: VoltageCurveKind) -> Result<Self, ValidationError> {
        if values.len() != grid.count() {
            return Err(ValidationError::LengthMismatch {
                what: "curve values",
                expected: grid.count(),
                found: values.len(),
            });
        }
        let bad = |v: &f64| if kind.allows_masked() { v.is_infinite() } else { !v.is_finite() };
        if values.iter().any(bad) {
            return Err(ValidationError::NonFinite { what: "curve values" });
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn v_start(&self) -> f64 {
        self.grid.start()
    }

    pub fn v_step(&self) -> f64 {
        self.grid.step()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> VoltageCurveKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeCurve {
    grid: UniformGrid,
    values: Vec<f64>,
    kind: TimeCurveKind,
}

impl TimeCurve {
    pub fn new(grid: UniformGrid, values: Vec<f64>, kind: TimeCurveKind) -> Result<Self, ValidationError> {
        if values.len() != grid.count() {
            return Err(ValidationError::LengthMismatch {
                what: "curve values",
                expected: grid.count(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ValidationError::NonFinite { what: "curve values" });
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn t_start(&self) -> f64 {
        self.grid.start()
    }

    pub fn t_step(&self) -> f64 {
        self.grid.step()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> TimeCurveKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgeMarker {
    pub days: Option<f64>,
    pub cycles: Option<f64>,
}

/// One reference performance test of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RptRecord {
    pub cell_id: String,
    pub rpt_index: u32,
    pub age: AgeMarker,
    /// Ah.
    pub remaining_capacity: f64,
    /// Lab spectra, at most one per SOC.
    pub lab_spectra: Vec<EisSpectrum>,
    pub field_spectra: Vec<EisSpectrum>,
    pub charge_qv: Option<VoltageCurve>,
    pub discharge_qv: Option<VoltageCurve>,
    pub relaxation: Option<TimeCurve>,
}

impl RptRecord {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(self.remaining_capacity.is_finite() && self.remaining_capacity > 0.0) {
            return Err(ValidationError::NonPositiveCapacity(self.remaining_capacity));
        }
        for (i, s) in self.lab_spectra.iter().enumerate() {
            if s.provenance() != Provenance::Lab {
                return Err(ValidationError::WrongProvenance { expected: Provenance::Lab });
            }
            if self.lab_spectra[..i].iter().any(|o| approx_eq(o.soc(), s.soc())) {
                return Err(ValidationError::DuplicateLabSoc(s.soc()));
            }
        }
        if self.field_spectra.iter().any(|s| s.provenance() != Provenance::Field) {
            return Err(ValidationError::WrongProvenance { expected: Provenance::Field });
        }
        for (curve, want) in [(&self.charge_qv, VoltageCurveKind::ChargeQV), (&self.discharge_qv, VoltageCurveKind::DischargeQV)] {
            if let Some(c) = curve {
                if c.kind() != want {
                    return Err(ValidationError::UnexpectedKind(c.kind().as_str()));
                }
            }
        }
        if let Some(r) = &self.relaxation {
            if r.kind() != TimeCurveKind::RelaxationVT {
                return Err(ValidationError::UnexpectedKind(r.kind().as_str()));
            }
        }
        for v in [self.age.days, self.age.cycles].into_iter().flatten() {
            if !v.is_finite() {
                return Err(ValidationError::NonFinite { what: "age marker" });
            }
        }
        Ok(())
    }

    /// Lab spectrum measured at `soc`.
    pub fn lab_spectrum(&self, soc: f64) -> Option<&EisSpectrum> {
        self.lab_spectra.iter().find(|s| approx_eq(s.soc(), soc))
    }

    pub fn age(&self, unit: AgeUnit) -> Option<f64> {
        match unit {
            AgeUnit::Days => self.age.days,
            AgeUnit::Cycles => self.age.cycles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeUnit {
    Days,
    Cycles,
}

impl fmt::Display for AgeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgeUnit::Days => "days",
            AgeUnit::Cycles => "cycles",
        })
    }
}

/// All RPTs of one cell, ordered by `rpt_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHistory {
    pub cell_id: String,
    pub records: Vec<RptRecord>,
    /// Test-condition labels such as DOD, temperature, C-rate and aging type.
    pub metadata: BTreeMap<String, String>,
}

impl CellHistory {
    /// Sorts records by `rpt_index` and validates every record.
    pub fn new(
        cell_id: impl Into<String>,
        mut records: Vec<RptRecord>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, ValidationError> {
        let cell_id = cell_id.into();
        records.sort_by_key(|r| r.rpt_index);
        for (i, r) in records.iter().enumerate() {
            if r.cell_id != cell_id {
                return Err(ValidationError::CellIdMismatch { expected: cell_id.clone(), found: r.cell_id.clone() });
            }
            if i > 0 && records[i - 1].rpt_index == r.rpt_index {
                return Err(ValidationError::DuplicateRpt(r.rpt_index));
            }
            r.validate()?;
        }
        Ok(Self { cell_id, records, metadata })
    }

    pub fn record(&self, rpt_index: u32) -> Option<&RptRecord> {
        self.records.iter().find(|r| r.rpt_index == rpt_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<CellHistory>,
    pub test: Vec<CellHistory>,
}
