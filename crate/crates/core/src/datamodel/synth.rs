//! Synthetic aging-data generator for desk-scale verification.
//!
//! Every quantity is a smooth function of a latent aging variable `a` in
//! `[0, 1]` per RPT. Field and lab impedance differ only by a positive
//! factor depending on (SOC, temperature), so lab quantities are exact
//! functions of (field Re, SOC, T) when `noise` is zero.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::error::DataError;
use super::split::CONDITION_KEY;
use super::types::{
    AgeMarker, CellHistory, EisSpectrum, FrequencyGrid, Provenance, RptRecord, TimeCurve, TimeCurveKind,
    UniformGrid, VoltageCurve, VoltageCurveKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub min_hz: f64,
    pub max_hz: f64,
    pub count: usize,
}

impl LogGrid {
    pub fn frequencies(&self) -> Vec<f64> {
        let (lo, hi) = (self.min_hz.log10(), self.max_hz.log10());
        (0..self.count)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (self.count - 1) as f64))
            .collect()
    }
}

/// All fields are required in the JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_cells: usize,
    pub n_rpts: usize,
    /// Relative standard deviation of multiplicative measurement noise.
    pub noise: f64,
    /// One condition group per temperature; cells fill groups in order.
    pub temperatures_c: Vec<f64>,
    pub field_socs: Vec<f64>,
    pub lab_socs: Vec<f64>,
    pub lab_temperature_c: f64,
    pub frequencies: LogGrid,
    pub charge_grid: UniformGrid,
    pub discharge_grid: UniformGrid,
    #[serde(deserialize_with = "Option::deserialize")]
    pub relaxation_grid: Option<UniformGrid>,
    pub nominal_capacity_ah: f64,
    /// Fraction of nominal capacity lost at `a = 1`.
    pub capacity_fade: f64,
    /// Range of each cell's latent aging reached at its last RPT.
    pub aging_range: [f64; 2],
    /// Relative change of impedance per °C below 25 °C.
    pub temperature_coefficient: f64,
    /// Quadratic SOC dependence of impedance around SOC = 0.6.
    pub soc_curvature: f64,
    pub days_per_rpt: f64,
    pub cycles_per_rpt: f64,
}

impl SynthConfig {
    /// Twelve cells in three temperature groups, ten RPTs each, noise free.
    pub fn desk_default() -> Self {
        SynthConfig {
            n_cells: 12,
            n_rpts: 10,
            noise: 0.0,
            temperatures_c: vec![10.0, 25.0, 40.0],
            field_socs: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            lab_socs: vec![0.5, 0.9],
            lab_temperature_c: 25.0,
            frequencies: LogGrid { min_hz: 2.08, max_hz: 1000.0, count: 16 },
            charge_grid: UniformGrid::new(2.5, 0.01, 160).expect("valid grid"),
            discharge_grid: UniformGrid::new(2.5, 0.01, 160).expect("valid grid"),
            relaxation_grid: Some(UniformGrid::new(0.0, 60.0, 50).expect("valid grid")),
            nominal_capacity_ah: 3.0,
            capacity_fade: 0.3,
            aging_range: [0.9, 1.0],
            temperature_coefficient: 0.012,
            soc_curvature: 0.25,
            days_per_rpt: 21.0,
            cycles_per_rpt: 50.0,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidConfig(m.to_string()));
        if self.n_cells == 0 || self.n_rpts < 2 {
            return bad("need at least one cell and two RPTs");
        }
        if self.temperatures_c.is_empty() || !self.n_cells.is_multiple_of(self.temperatures_c.len()) {
            return bad("n_cells must be a positive multiple of the number of temperatures");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be nonnegative");
        }
        if self.field_socs.is_empty() || self.lab_socs.is_empty() {
            return bad("field_socs and lab_socs must be non-empty");
        }
        if self.field_socs.iter().chain(&self.lab_socs).any(|s| !(0.0..=1.0).contains(s)) {
            return bad("socs must lie in [0, 1]");
        }
        if !(self.frequencies.min_hz > 0.0 && self.frequencies.max_hz > self.frequencies.min_hz && self.frequencies.count >= 2) {
            return bad("frequency grid needs 0 < min_hz < max_hz and count >= 2");
        }
        let [lo, hi] = self.aging_range;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return bad("aging_range must satisfy 0 < lo <= hi <= 1");
        }
        if !(self.nominal_capacity_ah > 0.0 && (0.0..1.0).contains(&self.capacity_fade)) {
            return bad("nominal capacity must be positive and capacity_fade in [0, 1)");
        }
        if self.capacity_fade == 0.0 {
            return bad("capacity_fade must be positive so capacity decreases with age");
        }
        Ok(())
    }

    pub fn model(&self) -> SynthModel {
        SynthModel {
            nominal_capacity: self.nominal_capacity_ah,
            capacity_fade: self.capacity_fade,
            temperature_coefficient: self.temperature_coefficient,
            soc_curvature: self.soc_curvature,
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// The generative maps behind [`synth_generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthModel {
    pub nominal_capacity: f64,
    pub capacity_fade: f64,
    pub temperature_coefficient: f64,
    pub soc_curvature: f64,
}

impl SynthModel {
    const TAU_1: f64 = 0.02;
    const TAU_2: f64 = 5e-4;

    fn resistances(a: f64) -> (f64, f64, f64) {
        (14.0 + 6.0 * a, 3.0 + 5.0 * a, 1.5 + 1.5 * a)
    }

    /// Positive impedance scale factor at (SOC, T).
    pub fn condition_factor(&self, soc: f64, temperature: f64) -> f64 {
        (self.temperature_coefficient * (25.0 - temperature)).exp() * (1.0 + self.soc_curvature * (soc - 0.6).powi(2))
    }

    /// Reference impedance (mΩ) at factor 1, increasing in `a`.
    pub fn base_impedance(&self, f: f64, a: f64) -> (f64, f64) {
        let (r0, r1, r2) = Self::resistances(a);
        let w = 2.0 * PI * f;
        let (x1, x2) = (w * Self::TAU_1, w * Self::TAU_2);
        let re = r0 + r1 / (1.0 + x1 * x1) + r2 / (1.0 + x2 * x2);
        let im = -(r1 * x1 / (1.0 + x1 * x1) + r2 * x2 / (1.0 + x2 * x2));
        (re, im)
    }

    pub fn impedance(&self, f: f64, a: f64, soc: f64, temperature: f64) -> (f64, f64) {
        let m = self.condition_factor(soc, temperature);
        let (re, im) = self.base_impedance(f, a);
        (m * re, m * im)
    }

    /// Map a field real impedance to the lab condition for the same cell state.
    pub fn field_to_lab(&self, re_field: f64, soc_f: f64, t_f: f64, soc_l: f64, t_l: f64) -> f64 {
        re_field * self.condition_factor(soc_l, t_l) / self.condition_factor(soc_f, t_f)
    }

    pub fn capacity(&self, a: f64) -> f64 {
        self.nominal_capacity * (1.0 - self.capacity_fade * a)
    }

    pub fn charge_q(&self, v: f64, a: f64) -> f64 {
        let shape = 0.45 * logistic((v - (3.55 + 0.04 * a)) / 0.06) + 0.55 * logistic((v - (3.85 + 0.03 * a)) / 0.09);
        self.capacity(a) * (0.03 + 0.97 * shape)
    }

    pub fn discharge_q(&self, v: f64, a: f64) -> f64 {
        let shape = 0.5 * logistic((v - (3.45 - 0.04 * a)) / 0.07) + 0.5 * logistic((v - (3.75 - 0.03 * a)) / 0.1);
        self.capacity(a) * (0.03 + 0.97 * (1.0 - shape))
    }

    pub fn relaxation_v(&self, t: f64, a: f64) -> f64 {
        4.2 - (0.015 + 0.03 * a) * (1.0 - (-t / (400.0 + 800.0 * a)).exp())
    }
}

/// Latent aging per cell and RPT, as used by [`synth_generate`].
pub fn latent_aging(config: &SynthConfig, seed: u64) -> Result<Vec<Vec<f64>>, DataError> {
    config.validate()?;
    Ok((0..config.n_cells)
        .map(|c| {
            let mut rng = cell_rng(seed, c);
            let reach = rng.random_range(config.aging_range[0]..=config.aging_range[1]);
            (0..config.n_rpts).map(|k| reach * k as f64 / (config.n_rpts - 1) as f64).collect()
        })
        .collect())
}

fn cell_rng(seed: u64, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64);
    rng
}

pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<Vec<CellHistory>, DataError> {
    let latent = latent_aging(config, seed)?;
    let model = config.model();
    let grid = FrequencyGrid::new(config.frequencies.frequencies()).map_err(|e| DataError::InvalidConfig(e.to_string()))?;
    let group_size = config.n_cells / config.temperatures_c.len();
    let width = config.n_cells.to_string().len().max(2);

    let mut cells = Vec::with_capacity(config.n_cells);
    for (c, ages) in latent.iter().enumerate() {
        let id = format!("cell{:0width$}", c + 1);
        let temperature = config.temperatures_c[c / group_size];
        // the first draw of this stream picked the aging reach
        let mut rng = cell_rng(seed, c);
        let _: f64 = rng.random_range(config.aging_range[0]..=config.aging_range[1]);
        let noise = config.noise;
        let mut jitter = |v: f64| -> f64 {
            if noise == 0.0 {
                v
            } else {
                let z: f64 = rng.sample(StandardNormal);
                v * (1.0 + noise * z)
            }
        };

        let mut records = Vec::with_capacity(config.n_rpts);
        for (k, &a) in ages.iter().enumerate() {
            let invalid = |e: super::error::ValidationError| DataError::from_validation(&id, Some(k as u32), e);
            let spectrum = |soc: f64, t: f64, prov: Provenance, jitter: &mut dyn FnMut(f64) -> f64| {
                let (re, im): (Vec<f64>, Vec<f64>) = grid
                    .as_slice()
                    .iter()
                    .map(|&f| {
                        let (re, im) = model.impedance(f, a, soc, t);
                        (jitter(re), jitter(im))
                    })
                    .unzip();
                EisSpectrum::new(grid.clone(), re, Some(im), soc, t, prov)
            };
            let lab_spectra = config
                .lab_socs
                .iter()
                .map(|&s| spectrum(s, config.lab_temperature_c, Provenance::Lab, &mut jitter))
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            let field_spectra = config
                .field_socs
                .iter()
                .map(|&s| spectrum(s, temperature, Provenance::Field, &mut jitter))
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            let charge: Vec<f64> = config.charge_grid.values().iter().map(|&v| jitter(model.charge_q(v, a))).collect();
            let discharge: Vec<f64> =
                config.discharge_grid.values().iter().map(|&v| jitter(model.discharge_q(v, a))).collect();
            let relaxation = match &config.relaxation_grid {
                Some(g) => {
                    let values = g.values().iter().map(|&t| jitter(model.relaxation_v(t, a))).collect();
                    Some(TimeCurve::new(*g, values, TimeCurveKind::RelaxationVT).map_err(invalid)?)
                }
                None => None,
            };
            let capacity = jitter(model.capacity(a));
            records.push(RptRecord {
                cell_id: id.clone(),
                rpt_index: k as u32,
                age: AgeMarker {
                    days: Some(k as f64 * config.days_per_rpt),
                    cycles: Some(k as f64 * config.cycles_per_rpt),
                },
                remaining_capacity: capacity,
                lab_spectra,
                field_spectra,
                charge_qv: Some(VoltageCurve::new(config.charge_grid, charge, VoltageCurveKind::ChargeQV).map_err(invalid)?),
                discharge_qv: Some(
                    VoltageCurve::new(config.discharge_grid, discharge, VoltageCurveKind::DischargeQV).map_err(invalid)?,
                ),
                relaxation,
            });
        }
        let mut metadata = BTreeMap::new();
        metadata.insert(CONDITION_KEY.to_string(), format!("T{temperature}"));
        metadata.insert("temperature_c".to_string(), temperature.to_string());
        metadata.insert("aging_type".to_string(), "synthetic".to_string());
        cells.push(CellHistory::new(id.clone(), records, metadata).map_err(|e| DataError::from_validation(&id, None, e))?);
    }
    Ok(cells)
}
