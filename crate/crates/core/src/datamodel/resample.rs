use super::error::DataError;
use super::types::{TimeCurve, TimeCurveKind, UniformGrid, VoltageCurve, VoltageCurveKind};

/// Linear interpolation of scattered `(x, y)` samples onto a uniform grid.
///
/// Points are sorted by x; exact duplicates are dropped, while repeated x
/// with different y is rejected. With `clamp` set, grid points outside the
/// sampled range take the nearest endpoint value; otherwise they are an
/// error.
pub fn resample_values(points: &[(f64, f64)], grid: &UniformGrid, clamp: bool) -> Result<Vec<f64>, DataError> {
    if points.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(DataError::NonFiniteSample);
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup();
    for w in pts.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(DataError::NonMonotonicX(w[0].0));
        }
    }
    let (min, max) = (pts[0].0, pts[pts.len() - 1].0);

    let mut out = Vec::with_capacity(grid.count());
    for i in 0..grid.count() {
        let x = grid.value(i);
        if x < min || x > max {
            if !clamp {
                return Err(DataError::GridOutOfRange { point: x, min, max });
            }
            out.push(if x < min { pts[0].1 } else { pts[pts.len() - 1].1 });
            continue;
        }
        // segment with x0 <= x < x1; the last point maps onto itself
        let k = pts.partition_point(|p| p.0 <= x) - 1;
        if k + 1 == pts.len() {
            out.push(pts[k].1);
            continue;
        }
        let (x0, y0) = pts[k];
        let (x1, y1) = pts[k + 1];
        let t = (x - x0) / (x1 - x0);
        out.push(y0 + (y1 - y0) * t);
    }
    Ok(out)
}

pub fn resample_voltage_curve(
    points: &[(f64, f64)],
    grid: &UniformGrid,
    kind: VoltageCurveKind,
    clamp: bool,
) -> Result<VoltageCurve, DataError> {
    let values = resample_values(points, grid, clamp)?;
    VoltageCurve::new(*grid, values, kind).map_err(|e| DataError::InvalidConfig(e.to_string()))
}

pub fn resample_time_curve(
    points: &[(f64, f64)],
    grid: &UniformGrid,
    kind: TimeCurveKind,
    clamp: bool,
) -> Result<TimeCurve, DataError> {
    let values = resample_values(points, grid, clamp)?;
    TimeCurve::new(*grid, values, kind).map_err(|e| DataError::InvalidConfig(e.to_string()))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn linear_identity() {
        let grid = UniformGrid::new(0.0, 0.5, 3).unwrap();
        assert_eq!(resample_values(&[(0.0, 0.0), (1.0, 1.0)], &grid, false).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn line_is_reproduced_exactly() {
        let pts: Vec<_> = (0..=4).map(|i| (i as f64, 2.0 * i as f64)).collect();
        let grid = UniformGrid::new(0.0, 0.5, 9).unwrap();
        let got = resample_values(&pts, &grid, false).unwrap();
        let want: Vec<f64> = grid.values().iter().map(|x| 2.0 * x).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn errors() {
        let grid = UniformGrid::new(0.0, 1.0, 3).unwrap();
        assert!(matches!(resample_values(&[], &grid, false), Err(DataError::EmptyInput)));
        assert!(matches!(
            resample_values(&[(0.0, 1.0), (0.0, 2.0), (2.0, 3.0)], &grid, false),
            Err(DataError::NonMonotonicX(_))
        ));
        assert!(matches!(resample_values(&[(0.0, 1.0), (1.5, 2.0)], &grid, false), Err(DataError::GridOutOfRange { .. })));
        assert_eq!(resample_values(&[(0.0, 1.0), (1.5, 2.0)], &grid, true).unwrap()[2], 2.0);
        // exact duplicates are harmless
        assert!(resample_values(&[(0.0, 1.0), (0.0, 1.0), (2.0, 3.0)], &grid, false).is_ok());
    }

    proptest! {
        #[test]
        fn monotone_in_monotone_out(steps in proptest::collection::vec(0.0f64..5.0, 2..40), n in 2usize..60) {
            let pts: Vec<(f64, f64)> = steps.iter().enumerate()
                .scan(0.0, |acc, (i, s)| { *acc += s; Some((i as f64, *acc)) })
                .collect();
            let max = (pts.len() - 1) as f64;
            let grid = UniformGrid::new(0.0, max / (n - 1) as f64, n).unwrap();
            let v = resample_values(&pts, &grid, true).unwrap();
            for w in v.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }

        #[test]
        fn source_grid_returns_source_values(ys in proptest::collection::vec(-100.0f64..100.0, 2..50), start in -10.0f64..10.0, step in 0.01f64..2.0) {
            let grid = UniformGrid::new(start, step, ys.len()).unwrap();
            let pts: Vec<_> = ys.iter().enumerate().map(|(i, &y)| (grid.value(i), y)).collect();
            prop_assert_eq!(resample_values(&pts, &grid, false).unwrap(), ys);
        }
    }
}
