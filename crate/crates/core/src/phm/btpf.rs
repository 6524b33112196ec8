use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mlcore::pearson;

use super::curves::{PhmCurve, PhmCurveKind};
use super::error::PhmError;

/// A two-point feature |curve[i] - curve[j]| with its training correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtpfSpec {
    pub kind: PhmCurveKind,
    pub index_i: usize,
    pub index_j: usize,
    /// Signed Pearson coefficient on the training set.
    pub training_correlation: f64,
    /// Axis values at i and j.
    pub axis_i: f64,
    pub axis_j: f64,
    pub axis_len: usize,
    /// Number of pairs scanned.
    pub candidates: usize,
}

impl BtpfSpec {
    pub fn describe(&self) -> String {
        let u = self.kind.axis_unit();
        format!("{}: |x({} {u}) - x({} {u})|, r = {:.4}", self.kind.as_str(), self.axis_i, self.axis_j, self.training_correlation)
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    i: usize,
    j: usize,
    r: f64,
}

/// Larger |r| wins; equal |r| goes to the smaller (i, j).
fn better(a: Candidate, b: Candidate) -> Candidate {
    match a.r.abs().total_cmp(&b.r.abs()) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if (a.i, a.j) <= (b.i, b.j) {
                a
            } else {
                b
            }
        }
    }
}

/// Exhaustive scan over every pair i > j of the curve's grid.
pub fn select_btpf(curves: &[&PhmCurve], targets: &[f64]) -> Result<BtpfSpec, PhmError> {
    let n = curves.len();
    if n < 3 {
        return Err(PhmError::TooFewSamples { needed: 3, got: n });
    }
    if targets.len() != n {
        return Err(PhmError::TooFewSamples { needed: n, got: targets.len() });
    }
    let kind = curves[0].kind;
    let m = curves[0].values.len();
    for c in curves {
        if c.kind != kind {
            return Err(PhmError::KindMismatch { expected: kind, found: c.kind });
        }
        if c.values.len() != m {
            return Err(PhmError::GridMismatch(kind));
        }
    }
    let best = (1..m)
        .into_par_iter()
        .filter_map(|i| {
            let mut feature = vec![0.0; n];
            let mut best: Option<Candidate> = None;
            for j in 0..i {
                for (f, c) in feature.iter_mut().zip(curves) {
                    *f = (c.values[i] - c.values[j]).abs();
                }
                if feature.iter().any(|v| !v.is_finite()) {
                    continue;
                }
                let Ok(r) = pearson(&feature, targets) else { continue };
                let cand = Candidate { i, j, r };
                best = Some(best.map_or(cand, |b| better(b, cand)));
            }
            best
        })
        .reduce_with(better)
        .ok_or(PhmError::AllConstant)?;
    let axis = &curves[0].axis;
    Ok(BtpfSpec {
        kind,
        index_i: best.i,
        index_j: best.j,
        training_correlation: best.r,
        axis_i: axis[best.i],
        axis_j: axis[best.j],
        axis_len: m,
        candidates: m * (m - 1) / 2,
    })
}

pub fn extract_btpf(curve: &PhmCurve, spec: &BtpfSpec) -> Result<f64, PhmError> {
    if curve.kind != spec.kind {
        return Err(PhmError::KindMismatch { expected: spec.kind, found: curve.kind });
    }
    if curve.values.len() != spec.axis_len {
        return Err(PhmError::GridMismatch(spec.kind));
    }
    Ok((curve.values[spec.index_i] - curve.values[spec.index_j]).abs())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn curve(values: Vec<f64>) -> PhmCurve {
        let axis = (0..values.len()).map(|i| 2.5 + 0.01 * i as f64).collect();
        PhmCurve { kind: PhmCurveKind::ChargeQV, axis, values }
    }

    fn random_curves(n: usize, m: usize, seed: u64) -> Vec<PhmCurve> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| curve((0..m).map(|_| rng.random::<f64>()).collect())).collect()
    }

    fn brute_force(curves: &[PhmCurve], targets: &[f64]) -> (usize, usize, f64) {
        let m = curves[0].values.len();
        let mut best = (0, 0, 0.0f64);
        let mut found = false;
        for i in 0..m {
            for j in 0..i {
                let f: Vec<f64> = curves.iter().map(|c| (c.values[i] - c.values[j]).abs()).collect();
                if let Ok(r) = pearson(&f, targets) {
                    if !found || r.abs() > best.2.abs() {
                        best = (i, j, r);
                        found = true;
                    }
                }
            }
        }
        best
    }

    #[test]
    fn planted_pair() {
        let curves = random_curves(25, 12, 1);
        let targets: Vec<f64> = curves.iter().map(|c| (c.values[7] - c.values[2]).abs()).collect();
        let refs: Vec<&PhmCurve> = curves.iter().collect();
        let spec = select_btpf(&refs, &targets).unwrap();
        assert_eq!((spec.index_i, spec.index_j), (7, 2));
        assert!((spec.training_correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn candidate_count() {
        let curves = random_curves(4, 160, 2);
        let refs: Vec<&PhmCurve> = curves.iter().collect();
        let spec = select_btpf(&refs, &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(spec.candidates, 12720);
    }

    #[test]
    fn constant_everything() {
        let curves: Vec<PhmCurve> = (0..5).map(|_| curve(vec![1.0; 6])).collect();
        let refs: Vec<&PhmCurve> = curves.iter().collect();
        assert!(matches!(select_btpf(&refs, &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(PhmError::AllConstant)));
    }

    #[test]
    fn extraction() {
        let spec = BtpfSpec { kind: PhmCurveKind::ChargeQV, index_i: 1, index_j: 3, training_correlation: 0.5, axis_i: 0.0, axis_j: 0.0, axis_len: 5, candidates: 10 };
        let c = curve(vec![0.0, 5.0, 1.0, 2.0, 0.0]);
        assert_eq!(extract_btpf(&c, &spec).unwrap(), 3.0);
        let swapped = BtpfSpec { index_i: 3, index_j: 1, ..spec.clone() };
        assert_eq!(extract_btpf(&c, &swapped).unwrap(), 3.0);
        assert_eq!(extract_btpf(&curve(vec![0.0; 5]), &spec).unwrap(), 0.0);
        let wrong = PhmCurve { kind: PhmCurveKind::ReF, ..c };
        assert!(matches!(extract_btpf(&wrong, &spec), Err(PhmError::KindMismatch { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn matches_brute_force(seed in 0u64..10_000) {
            let curves = random_curves(20, 10, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let targets: Vec<f64> = (0..20).map(|_| rng.random()).collect();
            let refs: Vec<&PhmCurve> = curves.iter().collect();
            let spec = select_btpf(&refs, &targets).unwrap();
            let (i, j, r) = brute_force(&curves, &targets);
            prop_assert_eq!((spec.index_i, spec.index_j), (i, j));
            prop_assert_eq!(spec.training_correlation, r);
        }

        #[test]
        fn extraction_shift_invariant(values in proptest::collection::vec(-10.0f64..10.0, 6), c in -100.0f64..100.0, i in 0usize..6, j in 0usize..6) {
            prop_assume!(i != j);
            let spec = BtpfSpec { kind: PhmCurveKind::ChargeQV, index_i: i, index_j: j, training_correlation: 0.0, axis_i: 0.0, axis_j: 0.0, axis_len: 6, candidates: 15 };
            let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
            let a = extract_btpf(&curve(values.clone()), &spec).unwrap();
            let b = extract_btpf(&curve(shifted), &spec).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + c.abs()));
        }
    }
}
