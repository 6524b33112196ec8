use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::EisSpectrum;
use crate::mlcore::kmeans;

use super::error::BridgeError;

/// Half-open (low, high] frequency bands in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyBands {
    pub medium: (f64, f64),
    pub high: (f64, f64),
}

impl Default for FrequencyBands {
    fn default() -> Self {
        FrequencyBands { medium: (1.0, 100.0), high: (100.0, 1000.0) }
    }
}

impl FrequencyBands {
    fn validate(&self) -> Result<(), BridgeError> {
        let (m, h) = (self.medium, self.high);
        if !(0.0 <= m.0 && m.0 < m.1 && m.1 <= h.0 && h.0 < h.1) {
            return Err(BridgeError::InvalidBands(format!("{m:?} / {h:?}")));
        }
        Ok(())
    }

    fn in_medium(&self, f: f64) -> bool {
        f > self.medium.0 && f <= self.medium.1
    }

    fn in_high(&self, f: f64) -> bool {
        f > self.high.0 && f <= self.high.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetFrequencies {
    pub f1: f64,
    pub f2: f64,
    pub bands: FrequencyBands,
    /// Votes per (f1, f2) center-frequency combination, sorted by frequency.
    pub vote_counts: Vec<((f64, f64), usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetOptions {
    pub bands: FrequencyBands,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PresetOptions {
    fn default() -> Self {
        PresetOptions { bands: FrequencyBands::default(), seed: 0, max_iter: 300, tol: 1e-10 }
    }
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        v.iter().map(|x| (x - m) / sd).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// The grid frequency in `candidates` closest to `target`; ties to the lower one.
fn nearest(candidates: &[f64], target: f64) -> f64 {
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if (c - target).abs() < (best - target).abs() {
            best = c;
        }
    }
    best
}

/// Center-frequency combination of one curve.
pub fn curve_vote(spectrum: &EisSpectrum, index: usize, opts: &PresetOptions) -> Result<(f64, f64), BridgeError> {
    let bands = opts.bands;
    let pts: Vec<(f64, f64)> = spectrum
        .grid()
        .as_slice()
        .iter()
        .zip(spectrum.re())
        .filter(|(f, _)| bands.in_medium(**f) || bands.in_high(**f))
        .map(|(f, r)| (*f, *r))
        .collect();
    let medium: Vec<f64> = pts.iter().map(|p| p.0).filter(|f| bands.in_medium(*f)).collect();
    let high: Vec<f64> = pts.iter().map(|p| p.0).filter(|f| bands.in_high(*f)).collect();
    if medium.len() < 2 {
        return Err(BridgeError::BandEmpty { curve: index, band: "medium" });
    }
    if high.len() < 2 {
        return Err(BridgeError::BandEmpty { curve: index, band: "high" });
    }
    let lf = zscore(&pts.iter().map(|p| p.0.log10()).collect::<Vec<_>>());
    let re = zscore(&pts.iter().map(|p| p.1).collect::<Vec<_>>());
    let features: Vec<Vec<f64>> = lf.iter().zip(&re).map(|(a, b)| vec![*a, *b]).collect();
    let result = kmeans(&features, 2, opts.seed, opts.max_iter, opts.tol)?;
    let mean_freq = |c: usize| {
        let members: Vec<f64> = pts.iter().zip(&result.assignments).filter(|(_, &a)| a == c).map(|(p, _)| p.0).collect();
        members.iter().sum::<f64>() / members.len() as f64
    };
    let (m0, m1) = (mean_freq(0), mean_freq(1));
    let (med_mean, high_mean) = if m0 <= m1 { (m0, m1) } else { (m1, m0) };
    Ok((nearest(&medium, med_mean), nearest(&high, high_mean)))
}

/// Modal center-frequency combination over all curves; ties go to the
/// lowest (f1, f2).
pub fn select_preset_frequencies(curves: &[EisSpectrum], opts: &PresetOptions) -> Result<PresetFrequencies, BridgeError> {
    opts.bands.validate()?;
    if curves.is_empty() {
        return Err(BridgeError::NoCurves);
    }
    let mut votes: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for (i, c) in curves.iter().enumerate() {
        let (a, b) = curve_vote(c, i, opts)?;
        // positive floats order like their bit patterns
        *votes.entry((a.to_bits(), b.to_bits())).or_default() += 1;
    }
    let mut best: Option<((u64, u64), usize)> = None;
    for (&k, &v) in &votes {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((k, v));
        }
    }
    let ((a, b), _) = best.expect("at least one vote");
    Ok(PresetFrequencies {
        f1: f64::from_bits(a),
        f2: f64::from_bits(b),
        bands: opts.bands,
        vote_counts: votes.into_iter().map(|((a, b), v)| ((f64::from_bits(a), f64::from_bits(b)), v)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{FrequencyGrid, Provenance};

    fn spectrum(freqs: &[f64], scale: f64) -> EisSpectrum {
        let grid = FrequencyGrid::new(freqs.to_vec()).unwrap();
        let re = freqs.iter().map(|f| scale * (10.0 + 8.0 / (1.0 + (f / 20.0).powi(2)))).collect();
        EisSpectrum::new(grid, re, None, 0.9, 25.0, Provenance::Lab).unwrap()
    }

    #[test]
    fn two_points_per_band() {
        let freqs = [0.5, 5.0, 50.0, 200.0, 800.0, 5000.0];
        let curves: Vec<_> = (0..7).map(|i| spectrum(&freqs, 1.0 + 0.05 * i as f64)).collect();
        let p = select_preset_frequencies(&curves, &PresetOptions::default()).unwrap();
        assert!([5.0, 50.0].contains(&p.f1));
        assert!([200.0, 800.0].contains(&p.f2));
        assert_eq!(p.vote_counts.len(), 1);
        assert_eq!(p.vote_counts[0].1, 7);
    }

    #[test]
    fn presets_are_grid_points_in_band() {
        let freqs: Vec<f64> = (0..16).map(|i| 2.08 * (1000.0f64 / 2.08).powf(i as f64 / 15.0)).collect();
        let curves: Vec<_> = (0..5).map(|i| spectrum(&freqs, 1.0 + 0.1 * i as f64)).collect();
        let p = select_preset_frequencies(&curves, &PresetOptions::default()).unwrap();
        assert!(freqs.contains(&p.f1) && freqs.contains(&p.f2));
        assert!(p.f1 > 1.0 && p.f1 <= 100.0 && p.f2 > 100.0 && p.f2 <= 1000.0);
    }

    #[test]
    fn band_empty() {
        let c = spectrum(&[5.0, 50.0, 200.0], 1.0);
        assert!(matches!(
            select_preset_frequencies(&[c], &PresetOptions::default()),
            Err(BridgeError::BandEmpty { curve: 0, band: "high" })
        ));
    }

    #[test]
    fn modal_tie_goes_to_lowest() {
        let a = [5.0, 50.0, 200.0, 800.0];
        let b = [2.0, 20.0, 300.0, 900.0];
        let curves = vec![spectrum(&b, 1.0), spectrum(&a, 1.0)];
        let p = select_preset_frequencies(&curves, &PresetOptions::default()).unwrap();
        assert_eq!(p.vote_counts.len(), 2);
        let lowest = p.vote_counts[0].0;
        assert_eq!((p.f1, p.f2), lowest);
    }
}
