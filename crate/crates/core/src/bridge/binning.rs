use serde::{Deserialize, Serialize};

use super::error::BridgeError;

pub const SOC_BINS: usize = 10;

/// Ten field-SOC intervals [0,0.1), ..., [0.8,0.9), [0.9,1].
pub fn soc_bin(soc: f64) -> (usize, bool) {
    let out = !(0.0..=1.0).contains(&soc);
    let s = soc.clamp(0.0, 1.0);
    (((s * SOC_BINS as f64).floor() as usize).min(SOC_BINS - 1), out)
}

/// Which lab SOC each field-SOC interval is translated to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocLabelPolicy {
    /// Interval i maps to lab SOC i/10.
    Decile,
    /// Every interval maps to the bank's target SOC.
    All,
}

impl SocLabelPolicy {
    /// Whether field interval `bin` feeds the bank targeting `target_soc`.
    pub fn feeds(&self, bin: usize, target_soc: f64) -> bool {
        match self {
            SocLabelPolicy::All => true,
            SocLabelPolicy::Decile => (target_soc * SOC_BINS as f64 - bin as f64).abs() < 1e-6,
        }
    }
}

/// Contiguous intervals [e0,e1), ..., [e_{n-1}, e_n].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ReBinning(Vec<f64>);

impl ReBinning {
    pub fn new(edges: Vec<f64>) -> Result<Self, BridgeError> {
        if edges.len() < 2 {
            return Err(BridgeError::InvalidBinning("need at least two edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BridgeError::InvalidBinning(format!("edges must increase: {edges:?}")));
        }
        Ok(Self(edges))
    }

    pub fn edges(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Containing interval; values outside clamp to the nearest end with a flag.
    pub fn assign(&self, re: f64) -> (usize, bool) {
        let e = &self.0;
        if re < e[0] {
            return (0, true);
        }
        if re >= e[e.len() - 1] {
            return (self.len() - 1, re > e[e.len() - 1]);
        }
        (e.partition_point(|&x| x <= re) - 1, false)
    }
}

impl TryFrom<Vec<f64>> for ReBinning {
    type Error = BridgeError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ReBinning> for Vec<f64> {
    fn from(b: ReBinning) -> Self {
        b.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReBinningSpec {
    /// Four 4 mΩ bins from 14 mΩ.
    Dataset1,
    /// Six 2 mΩ bins from 4 mΩ.
    Dataset2,
    Edges(Vec<f64>),
    /// Equal-width bins over the training range.
    Uniform(usize),
}

impl ReBinningSpec {
    pub fn resolve(&self, training: &[f64]) -> Result<ReBinning, BridgeError> {
        match self {
            ReBinningSpec::Dataset1 => ReBinning::new(vec![14.0, 18.0, 22.0, 26.0, 30.0]),
            ReBinningSpec::Dataset2 => ReBinning::new(vec![4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0]),
            ReBinningSpec::Edges(e) => ReBinning::new(e.clone()),
            ReBinningSpec::Uniform(count) => {
                if *count == 0 {
                    return Err(BridgeError::InvalidBinning("uniform binning needs a positive count".into()));
                }
                let lo = training.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = training.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !lo.is_finite() {
                    return Err(BridgeError::NoData);
                }
                let hi = if hi > lo { hi } else { lo + 1.0 };
                ReBinning::new((0..=*count).map(|i| lo + (hi - lo) * i as f64 / *count as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BinFlags {
    pub soc_out_of_range: bool,
    pub re_out_of_range: bool,
    /// The routed cell was empty and a neighbouring Re bin answered.
    pub fallback: bool,
}

pub fn assign_bins(soc_f: f64, re_f: f64, re_binning: &ReBinning) -> (usize, usize, BinFlags) {
    let (s, soc_out) = soc_bin(soc_f);
    let (r, re_out) = re_binning.assign(re_f);
    (s, r, BinFlags { soc_out_of_range: soc_out, re_out_of_range: re_out, fallback: false })
}
