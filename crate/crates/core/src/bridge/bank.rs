use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{CellHistory, EisSpectrum, MATCH_RTOL};
use crate::mlcore::{fit_adaptive, ForestModel, Matrix, TrainOptions};

use super::binning::{assign_bins, soc_bin, BinFlags, ReBinning, ReBinningSpec, SocLabelPolicy, SOC_BINS};
use super::error::BridgeError;
use super::preset::PresetFrequencies;

pub const BANK_FORMAT: &str = "labbridge.translation_bank";
pub const BANK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    F1,
    F2,
}

impl Role {
    pub const BOTH: [Role; 2] = [Role::F1, Role::F2];

    pub fn index(self) -> usize {
        match self {
            Role::F1 => 0,
            Role::F2 => 1,
        }
    }
}

/// Field measurement at the two preset frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldReading {
    /// Re^F at (f1, f2), mΩ.
    pub re: [f64; 2],
    pub soc: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationPair {
    pub reading: FieldReading,
    /// Re^L at (f1, f2) for the bank's target SOC, mΩ.
    pub lab_re: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankConfig {
    pub soc_policy: SocLabelPolicy,
    pub re_binning: ReBinningSpec,
}

impl Default for BankConfig {
    fn default() -> Self {
        BankConfig { soc_policy: SocLabelPolicy::All, re_binning: ReBinningSpec::Uniform(4) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankCell {
    pub role: Role,
    pub soc_bin: usize,
    pub re_bin: usize,
    pub n_samples: usize,
    pub model: ForestModel,
}

/// Interval-keyed field→lab Re models for one lab SOC target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationBank {
    pub target_soc: f64,
    pub preset: PresetFrequencies,
    pub soc_policy: SocLabelPolicy,
    /// Per role, indexed by [`Role::index`].
    pub re_binning: [ReBinning; 2],
    pub cells: Vec<BankCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    /// Re^L at (f1, f2), mΩ.
    pub re: [f64; 2],
    pub flags: [BinFlags; 2],
}

#[derive(Serialize, Deserialize)]
struct BankDocument {
    format: String,
    schema_version: u32,
    bank: TranslationBank,
}

/// Re at `f` on the spectrum's grid.
pub fn re_at(spectrum: &EisSpectrum, f: f64) -> Result<f64, BridgeError> {
    spectrum.re_at(f).ok_or(BridgeError::FrequencyNotOnGrid(f))
}

/// Every (field spectrum, lab spectrum at `target_soc`) pairing within the
/// same RPT. Records without a lab spectrum at the target are skipped.
pub fn translation_pairs(cells: &[CellHistory], preset: &PresetFrequencies, target_soc: f64) -> Result<Vec<TranslationPair>, BridgeError> {
    let mut out = Vec::new();
    for cell in cells {
        for r in &cell.records {
            let Some(lab) = r.lab_spectrum(target_soc) else { continue };
            let lab_re = [re_at(lab, preset.f1)?, re_at(lab, preset.f2)?];
            for field in &r.field_spectra {
                let reading = FieldReading {
                    re: [re_at(field, preset.f1)?, re_at(field, preset.f2)?],
                    soc: field.soc(),
                    temperature: field.temperature(),
                };
                out.push(TranslationPair { reading, lab_re });
            }
        }
    }
    Ok(out)
}

fn features(r: &FieldReading, role: Role) -> [f64; 3] {
    [r.re[role.index()], r.temperature, r.soc]
}

pub fn train_translation_bank(
    pairs: &[TranslationPair],
    preset: &PresetFrequencies,
    target_soc: f64,
    config: &BankConfig,
    opts: &TrainOptions,
) -> Result<TranslationBank, BridgeError> {
    let used: Vec<&TranslationPair> =
        pairs.iter().filter(|p| config.soc_policy.feeds(soc_bin(p.reading.soc).0, target_soc)).collect();
    if used.is_empty() {
        return Err(BridgeError::NoData);
    }
    let binning = |role: Role| -> Result<ReBinning, BridgeError> {
        let values: Vec<f64> = used.iter().map(|p| p.reading.re[role.index()]).collect();
        config.re_binning.resolve(&values)
    };
    let re_binning = [binning(Role::F1)?, binning(Role::F2)?];

    type Group<'a> = ((Role, usize, usize), Vec<&'a TranslationPair>);
    let mut groups: Vec<Group> = Vec::new();
    for role in Role::BOTH {
        for p in &used {
            let (s, r, _) = assign_bins(p.reading.soc, p.reading.re[role.index()], &re_binning[role.index()]);
            match groups.iter_mut().find(|(k, _)| *k == (role, s, r)) {
                Some((_, v)) => v.push(p),
                None => groups.push(((role, s, r), vec![p])),
            }
        }
    }
    groups.sort_by_key(|(k, _)| *k);

    let cells = groups
        .into_par_iter()
        .map(|((role, soc_bin, re_bin), members)| {
            let x: Vec<[f64; 3]> = members.iter().map(|p| features(&p.reading, role)).collect();
            let y: Vec<f64> = members.iter().map(|p| p.lab_re[role.index()]).collect();
            let fit = fit_adaptive(&Matrix::from_rows(&x)?, &Matrix::column(&y), opts)?;
            Ok(BankCell { role, soc_bin, re_bin, n_samples: members.len(), model: fit.model })
        })
        .collect::<Result<Vec<_>, BridgeError>>()?;
    log::debug!("translation bank soc {target_soc}: {} cells from {} pairs", cells.len(), used.len());
    Ok(TranslationBank { target_soc, preset: preset.clone(), soc_policy: config.soc_policy, re_binning, cells })
}

impl TranslationBank {
    pub fn cell(&self, role: Role, soc_bin: usize, re_bin: usize) -> Option<&BankCell> {
        self.cells.iter().find(|c| c.role == role && c.soc_bin == soc_bin && c.re_bin == re_bin)
    }

    pub fn count(&self, role: Role) -> usize {
        self.cells.iter().filter(|c| c.role == role).count()
    }

    /// Whether readings at this field SOC belong to this bank.
    pub fn accepts(&self, soc_f: f64) -> bool {
        self.soc_policy.feeds(soc_bin(soc_f).0, self.target_soc)
    }

    fn route(&self, role: Role, reading: &FieldReading) -> Result<(&BankCell, BinFlags), BridgeError> {
        let (s, r, mut flags) = assign_bins(reading.soc, reading.re[role.index()], &self.re_binning[role.index()]);
        if let Some(c) = self.cell(role, s, r) {
            return Ok((c, flags));
        }
        let nearest = self
            .cells
            .iter()
            .filter(|c| c.role == role && c.soc_bin == s)
            .min_by_key(|c| (c.re_bin.abs_diff(r), c.re_bin))
            .ok_or(BridgeError::NoModelAvailable { soc_bin: s })?;
        flags.fallback = true;
        Ok((nearest, flags))
    }

    pub fn predict(&self, reading: &FieldReading) -> Result<Translation, BridgeError> {
        let mut re = [0.0; 2];
        let mut flags = [BinFlags::default(); 2];
        for role in Role::BOTH {
            let (cell, f) = self.route(role, reading)?;
            re[role.index()] = cell.model.predict(&features(reading, role))?[0];
            flags[role.index()] = f;
        }
        Ok(Translation { re, flags })
    }

    pub fn soc_bins(&self) -> usize {
        SOC_BINS
    }

    pub fn to_json(&self) -> Result<String, BridgeError> {
        let doc = BankDocument { format: BANK_FORMAT.into(), schema_version: BANK_SCHEMA_VERSION, bank: self.clone() };
        serde_json::to_string(&doc).map_err(|e| BridgeError::Document(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, BridgeError> {
        let doc: BankDocument = serde_json::from_str(s).map_err(|e| BridgeError::Document(e.to_string()))?;
        if doc.format != BANK_FORMAT || doc.schema_version != BANK_SCHEMA_VERSION {
            return Err(BridgeError::Document(format!("unsupported document {} v{}", doc.format, doc.schema_version)));
        }
        Ok(doc.bank)
    }
}

pub fn predict_lab_re(bank: &TranslationBank, reading: &FieldReading) -> Result<Translation, BridgeError> {
    bank.predict(reading)
}

/// Same SOC within the shared matching tolerance.
pub fn same_soc(a: f64, b: f64) -> bool {
    (a - b).abs() <= MATCH_RTOL * a.abs().max(b.abs()).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::preset::FrequencyBands;
    use crate::mlcore::ForestHyperparams;

    fn preset() -> PresetFrequencies {
        PresetFrequencies { f1: 10.0, f2: 300.0, bands: FrequencyBands::default(), vote_counts: vec![] }
    }

    fn memorising() -> TrainOptions {
        TrainOptions { hyperparams: ForestHyperparams { n_estimators: 1, bootstrap: false, ..Default::default() }, grid: None }
    }

    fn pair(re: f64, soc: f64, t: f64) -> TranslationPair {
        let m = 1.0 + 0.01 * (25.0 - t) + 0.1 * soc;
        TranslationPair { reading: FieldReading { re: [re, re * 0.8], soc, temperature: t }, lab_re: [re / m, 0.8 * re / m] }
    }

    #[test]
    fn memorising_bank_reproduces_map() {
        let mut pairs = Vec::new();
        for i in 0..40 {
            for &soc in &[0.15, 0.55, 0.95] {
                pairs.push(pair(14.0 + 0.4 * i as f64, soc, 10.0 + (i % 3) as f64 * 10.0));
            }
        }
        let cfg = BankConfig { soc_policy: SocLabelPolicy::All, re_binning: ReBinningSpec::Dataset1 };
        let bank = train_translation_bank(&pairs, &preset(), 0.9, &cfg, &memorising()).unwrap();
        assert_eq!(bank.count(Role::F1), 12);
        for p in &pairs {
            let t = bank.predict(&p.reading).unwrap();
            for k in 0..2 {
                assert!((t.re[k] - p.lab_re[k]).abs() < 1e-6);
            }
        }
        let back = TranslationBank::from_json(&bank.to_json().unwrap()).unwrap();
        assert_eq!(back, bank);
    }

    #[test]
    fn single_cell_and_constant() {
        let pairs: Vec<_> = (0..5).map(|i| TranslationPair { lab_re: [7.0, 3.0], ..pair(15.0 + 0.1 * i as f64, 0.5, 25.0) }).collect();
        let cfg = BankConfig { soc_policy: SocLabelPolicy::All, re_binning: ReBinningSpec::Dataset1 };
        let bank = train_translation_bank(&pairs, &preset(), 0.9, &cfg, &memorising()).unwrap();
        assert_eq!((bank.count(Role::F1), bank.count(Role::F2)), (1, 1));
        let t = bank.predict(&FieldReading { re: [15.0, 12.0], soc: 0.52, temperature: -5.0 }).unwrap();
        assert_eq!(t.re, [7.0, 3.0]);
    }

    #[test]
    fn fallback_and_missing_row() {
        let pairs: Vec<_> = (0..6).map(|i| pair(15.0 + 0.2 * i as f64, 0.5, 25.0)).collect();
        let cfg = BankConfig { soc_policy: SocLabelPolicy::All, re_binning: ReBinningSpec::Dataset1 };
        let bank = train_translation_bank(&pairs, &preset(), 0.9, &cfg, &memorising()).unwrap();
        let t = bank.predict(&FieldReading { re: [27.0, 21.6], soc: 0.5, temperature: 25.0 }).unwrap();
        assert!(t.flags[0].fallback);
        assert!(matches!(
            bank.predict(&FieldReading { re: [15.0, 12.0], soc: 0.05, temperature: 25.0 }),
            Err(BridgeError::NoModelAvailable { soc_bin: 0 })
        ));
    }

    #[test]
    fn decile_policy_filters_rows() {
        let pairs: Vec<_> = [0.05, 0.35, 0.95].iter().flat_map(|&s| (0..4).map(move |i| pair(16.0 + i as f64, s, 25.0))).collect();
        let cfg = BankConfig { soc_policy: SocLabelPolicy::Decile, re_binning: ReBinningSpec::Dataset1 };
        let bank = train_translation_bank(&pairs, &preset(), 0.3, &cfg, &memorising()).unwrap();
        assert!(bank.cells.iter().all(|c| c.soc_bin == 3));
        assert!(matches!(
            train_translation_bank(&pairs, &preset(), 0.6, &cfg, &memorising()),
            Err(BridgeError::NoData)
        ));
    }
}
