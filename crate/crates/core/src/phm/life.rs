use serde::{Deserialize, Serialize};

use crate::datamodel::{AgeUnit, CellHistory};

use super::error::PhmError;

/// End of life is the first fall to this fraction of initial capacity.
pub const DEFAULT_EOL_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeTarget {
    pub eol_age: f64,
    pub unit: AgeUnit,
    /// Remaining life per RPT (history order), clamped at zero.
    pub remaining: Vec<f64>,
}

/// EOL age by linear interpolation at the first RPT whose capacity is at or
/// below `threshold` times the first RPT's capacity.
pub fn compute_life_target(history: &CellHistory, threshold: f64, unit: AgeUnit) -> Result<LifeTarget, PhmError> {
    let records = &history.records;
    let first = records.first().ok_or(PhmError::NoData)?;
    let ages: Vec<f64> = records.iter().map(|r| r.age(unit).ok_or(PhmError::MissingAge(r.rpt_index))).collect::<Result<_, _>>()?;
    let eol_cap = threshold * first.remaining_capacity;
    let k = records.iter().position(|r| r.remaining_capacity <= eol_cap).ok_or(PhmError::NeverCrosses)?;
    let eol_age = if records[k].remaining_capacity == eol_cap || k == 0 {
        ages[k]
    } else {
        let (c0, c1) = (records[k - 1].remaining_capacity, records[k].remaining_capacity);
        ages[k - 1] + (ages[k] - ages[k - 1]) * (c0 - eol_cap) / (c0 - c1)
    };
    let remaining = ages.iter().map(|a| (eol_age - a).max(0.0)).collect();
    Ok(LifeTarget { eol_age, unit, remaining })
}
