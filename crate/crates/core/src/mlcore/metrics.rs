use serde::{Deserialize, Serialize};

use super::error::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    Mae,
    Rmse,
    Mape,
}

impl Scoring {
    pub fn score(&self, y: &[f64], y_hat: &[f64]) -> Result<f64, MlError> {
        match self {
            Scoring::Mae => mae(y, y_hat),
            Scoring::Rmse => rmse(y, y_hat),
            Scoring::Mape => mape(y, y_hat),
        }
    }
}

fn check(y: &[f64], y_hat: &[f64]) -> Result<(), MlError> {
    if y.len() != y_hat.len() {
        return Err(MlError::LengthMismatch { left: y.len(), right: y_hat.len() });
    }
    if y.is_empty() {
        return Err(MlError::EmptyInput);
    }
    Ok(())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64, MlError> {
    check(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, MlError> {
    check(y, y_hat)?;
    Ok((y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt())
}

/// Mean absolute percentage error, in percent.
pub fn mape(y: &[f64], y_hat: &[f64]) -> Result<f64, MlError> {
    check(y, y_hat)?;
    if let Some(i) = y.iter().position(|&v| v == 0.0) {
        return Err(MlError::ZeroReference(i));
    }
    Ok(100.0 * y.iter().zip(y_hat).map(|(a, b)| ((a - b) / a).abs()).sum::<f64>() / y.len() as f64)
}

/// Sample Pearson correlation. Undefined when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MlError> {
    if x.len() != y.len() {
        return Err(MlError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(MlError::EmptyInput);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(MlError::ConstantInput);
    }
    if !sxy.is_finite() {
        return Err(MlError::NonFinite("pearson input"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn hand_evaluated_metrics() {
        let (y, p) = ([2.0, 4.0], [1.0, 5.0]);
        assert_eq!(mae(&y, &p).unwrap(), 1.0);
        assert_eq!(rmse(&y, &p).unwrap(), 1.0);
        assert!((mape(&y, &p).unwrap() - 37.5).abs() < 1e-12);
        assert_eq!(mape(&[1.0], &[0.0]).unwrap(), 100.0);
        assert_eq!(mape(&[0.0], &[1.0]), Err(MlError::ZeroReference(0)));
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(MlError::LengthMismatch { .. })));
    }

    #[test]
    fn pearson_by_hand() {
        // deviations: x (-1, 0, 1), y (-7/3, -1/3, 8/3); sxy = 5, sxx = 2, syy = 114/9
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap();
        assert!((r - 15.0 / 228f64.sqrt()).abs() < 1e-12);
        let x = [0.3, 1.0, -2.0, 5.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&x, &[1.0; 4]), Err(MlError::ConstantInput));
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (proptest::collection::vec(-100.0f64..100.0, n), proptest::collection::vec(-100.0f64..100.0, n))
        })
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae((y, p) in pair()) {
            prop_assert!(rmse(&y, &p).unwrap() >= mae(&y, &p).unwrap() - 1e-12);
        }

        #[test]
        fn scaling((y, p) in pair(), k in 0.01f64..100.0) {
            prop_assume!(y.iter().all(|v| v.abs() > 1e-3));
            let ky: Vec<f64> = y.iter().map(|v| k * v).collect();
            let kp: Vec<f64> = p.iter().map(|v| k * v).collect();
            let m = mae(&y, &p).unwrap();
            prop_assert!((mae(&ky, &kp).unwrap() - k * m).abs() <= 1e-9 * (1.0 + k * m));
            let q = mape(&y, &p).unwrap();
            prop_assert!((mape(&ky, &kp).unwrap() - q).abs() <= 1e-9 * (1.0 + q));
            let nky: Vec<f64> = ky.iter().map(|v| -v).collect();
            let nkp: Vec<f64> = kp.iter().map(|v| -v).collect();
            prop_assert!((mae(&nky, &nkp).unwrap() - k * m).abs() <= 1e-9 * (1.0 + k * m));
        }

        #[test]
        fn pearson_affine_invariance((x, y) in pair(), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            prop_assume!(x.len() >= 3);
            if let Ok(r) = pearson(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let nx: Vec<f64> = x.iter().map(|v| -v).collect();
                prop_assert!((pearson(&tx, &y).unwrap() - r).abs() < 1e-9);
                prop_assert!((pearson(&nx, &y).unwrap() + r).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
