use crate::datamodel::{TimeCurve, TimeCurveKind, VoltageCurve, VoltageCurveKind};

use super::error::AnalyticsError;

/// Below this |ΔQ| (Ah) a DV point is masked.
pub const DV_EPSILON: f64 = 1e-9;

const MIN_POINTS: usize = 3;

fn check_len(len: usize) -> Result<(), AnalyticsError> {
    if len < MIN_POINTS {
        return Err(AnalyticsError::TooShort { len, min: MIN_POINTS });
    }
    Ok(())
}

fn derived_kinds(kind: VoltageCurveKind) -> Result<(VoltageCurveKind, VoltageCurveKind), AnalyticsError> {
    match kind {
        VoltageCurveKind::ChargeQV => Ok((VoltageCurveKind::ChargeIC, VoltageCurveKind::ChargeDV)),
        VoltageCurveKind::DischargeQV => Ok((VoltageCurveKind::DischargeIC, VoltageCurveKind::DischargeDV)),
        other => Err(AnalyticsError::WrongKind { expected: "Q/V", found: other.as_str() }),
    }
}

/// Centered moving average, truncated at the ends. `window = 1` is the identity.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>, AnalyticsError> {
    if window == 0 {
        return Err(AnalyticsError::InvalidWindow);
    }
    if window == 1 {
        return Ok(values.to_vec());
    }
    let (back, fwd) = ((window - 1) / 2, window / 2);
    Ok((0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

/// dQ/dV by first differences; point i sits at `v_start + (i + 1) * v_step`.
pub fn ic_curve(qv: &VoltageCurve, window: usize) -> Result<VoltageCurve, AnalyticsError> {
    check_len(qv.len())?;
    let (kind, _) = derived_kinds(qv.kind())?;
    let step = qv.v_step();
    let raw: Vec<f64> = qv.values().windows(2).map(|w| (w[1] - w[0]) / step).collect();
    let values = moving_average(&raw, window)?;
    let grid = qv.grid().shifted().expect("length checked");
    Ok(VoltageCurve::new(grid, values, kind).expect("derived curve is consistent"))
}

/// dV/dQ per interval, NaN where |ΔQ| < [`DV_EPSILON`].
pub fn dv_curve(qv: &VoltageCurve) -> Result<VoltageCurve, AnalyticsError> {
    check_len(qv.len())?;
    let (_, kind) = derived_kinds(qv.kind())?;
    let step = qv.v_step();
    let values: Vec<f64> = qv
        .values()
        .windows(2)
        .map(|w| {
            let dq = w[1] - w[0];
            if dq.abs() < DV_EPSILON {
                f64::NAN
            } else {
                step / dq
            }
        })
        .collect();
    let grid = qv.grid().shifted().expect("length checked");
    Ok(VoltageCurve::new(grid, values, kind).expect("derived curve is consistent"))
}

pub fn relaxation_derivative(vt: &TimeCurve) -> Result<TimeCurve, AnalyticsError> {
    check_len(vt.len())?;
    if vt.kind() != TimeCurveKind::RelaxationVT {
        return Err(AnalyticsError::WrongKind { expected: "relaxation V/t", found: vt.kind().as_str() });
    }
    let step = vt.t_step();
    let values: Vec<f64> = vt.values().windows(2).map(|w| (w[1] - w[0]) / step).collect();
    let grid = vt.grid().shifted().expect("length checked");
    Ok(TimeCurve::new(grid, values, TimeCurveKind::RelaxationDVDT).expect("derived curve is consistent"))
}
