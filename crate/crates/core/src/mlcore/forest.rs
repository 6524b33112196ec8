use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::error::MlError;
use super::matrix::Matrix;
use super::tree::{Node, RegressionTree, TreeParams};

pub const FOREST_FORMAT: &str = "labbridge.forest";
pub const FOREST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// Fraction of the input features, rounded down, at least one.
    Fraction(f64),
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(&self, p: usize) -> usize {
        match *self {
            MaxFeatures::Fraction(f) => ((f * p as f64).floor() as usize).clamp(1, p),
            MaxFeatures::Count(c) => c.clamp(1, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestHyperparams {
    pub n_estimators: usize,
    /// `None` grows trees until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    /// Fraction of training rows drawn per tree.
    pub subsample: f64,
    /// Draw rows with replacement.
    pub bootstrap: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        ForestHyperparams {
            n_estimators: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Fraction(1.0),
            subsample: 1.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestHyperparams {
    pub fn validate(&self) -> Result<(), MlError> {
        let bad = |m: &str| Err(MlError::InvalidHyperparams(m.to_string()));
        if self.n_estimators == 0 {
            return bad("n_estimators must be at least 1");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be positive");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        match self.max_features {
            MaxFeatures::Fraction(f) if !(f > 0.0 && f <= 1.0) => bad("max_features fraction must lie in (0, 1]"),
            MaxFeatures::Count(0) => bad("max_features count must be positive"),
            _ => Ok(()),
        }
    }
}

/// Multi-output random forest regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub hyperparams: ForestHyperparams,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Per-output (min, max) of the training targets.
    pub target_range: Vec<(f64, f64)>,
    pub trees: Vec<RegressionTree>,
}

#[derive(Serialize, Deserialize)]
struct ForestDocument {
    format: String,
    schema_version: u32,
    model: ForestModel,
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

fn draw_rows<R: Rng>(n: usize, h: &ForestHyperparams, rng: &mut R) -> Vec<usize> {
    let m = ((h.subsample * n as f64).round() as usize).clamp(1, n);
    if h.bootstrap {
        (0..m).map(|_| rng.random_range(0..n)).collect()
    } else if m == n {
        (0..n).collect()
    } else {
        let mut rows = index::sample(rng, n, m).into_vec();
        rows.sort_unstable();
        rows
    }
}

pub fn fit_forest(x: &Matrix, y: &Matrix, h: &ForestHyperparams) -> Result<ForestModel, MlError> {
    h.validate()?;
    if x.rows() != y.rows() {
        return Err(MlError::ShapeMismatch { expected: x.rows(), found: y.rows() });
    }
    if x.cols() == 0 || y.cols() == 0 {
        return Err(MlError::EmptyInput);
    }
    let n = x.rows();
    if n < 2 * h.min_samples_leaf {
        return Err(MlError::TooFewSamples { needed: 2 * h.min_samples_leaf, got: n });
    }
    if !x.is_finite() {
        return Err(MlError::NonFinite("forest inputs"));
    }
    if !y.is_finite() {
        return Err(MlError::NonFinite("forest targets"));
    }
    let target_range: Vec<(f64, f64)> = (0..y.cols())
        .map(|j| {
            (0..n).map(|i| y.get(i, j)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect();
    let params = TreeParams {
        max_depth: h.max_depth,
        min_samples_leaf: h.min_samples_leaf,
        n_features: h.max_features.resolve(x.cols()),
    };
    let trees = (0..h.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(h.seed, t);
            let rows = draw_rows(n, h, &mut rng);
            RegressionTree::fit(x, y, rows, &params, &mut rng)
        })
        .collect();
    Ok(ForestModel { hyperparams: *h, input_dim: x.cols(), output_dim: y.cols(), target_range, trees })
}

impl ForestModel {
    /// A model that predicts `value` everywhere.
    pub fn constant(value: Vec<f64>, input_dim: usize) -> Self {
        ForestModel {
            hyperparams: ForestHyperparams { n_estimators: 1, ..Default::default() },
            input_dim,
            output_dim: value.len(),
            target_range: value.iter().map(|&v| (v, v)).collect(),
            trees: vec![RegressionTree { nodes: vec![Node::Leaf { value }] }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, MlError> {
        if x.len() != self.input_dim {
            return Err(MlError::ShapeMismatch { expected: self.input_dim, found: x.len() });
        }
        let mut out = vec![0.0; self.output_dim];
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.leaf_for(x)) {
                *o += v;
            }
        }
        let t = self.trees.len() as f64;
        for (o, &(lo, hi)) in out.iter_mut().zip(&self.target_range) {
            *o = (*o / t).clamp(lo, hi);
        }
        Ok(out)
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Matrix, MlError> {
        if x.cols() != self.input_dim {
            return Err(MlError::ShapeMismatch { expected: self.input_dim, found: x.cols() });
        }
        let rows: Vec<Vec<f64>> = (0..x.rows()).into_par_iter().map(|i| self.predict(x.row(i))).collect::<Result<_, _>>()?;
        let data = rows.into_iter().flatten().collect();
        Matrix::new(x.rows(), self.output_dim, data)
    }

    pub fn to_json(&self) -> Result<String, MlError> {
        let doc = ForestDocument {
            format: FOREST_FORMAT.to_string(),
            schema_version: FOREST_SCHEMA_VERSION,
            model: self.clone(),
        };
        serde_json::to_string(&doc).map_err(|e| MlError::Document(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, MlError> {
        let doc: ForestDocument = serde_json::from_str(s).map_err(|e| MlError::Document(e.to_string()))?;
        if doc.format != FOREST_FORMAT {
            return Err(MlError::Document(format!("unexpected format {:?}", doc.format)));
        }
        if doc.schema_version != FOREST_SCHEMA_VERSION {
            return Err(MlError::Document(format!("unsupported schema version {}", doc.schema_version)));
        }
        doc.model.check()?;
        Ok(doc.model)
    }

    fn check(&self) -> Result<(), MlError> {
        if self.trees.is_empty() || self.target_range.len() != self.output_dim {
            return Err(MlError::Document("inconsistent model header".into()));
        }
        for tree in &self.trees {
            for node in &tree.nodes {
                let ok = match node {
                    Node::Split { feature, left, right, .. } => {
                        *feature < self.input_dim && *left < tree.nodes.len() && *right < tree.nodes.len()
                    }
                    Node::Leaf { value } => value.len() == self.output_dim,
                };
                if !ok {
                    return Err(MlError::Document("malformed node table".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::mlcore::metrics::mae;

    fn single_tree() -> ForestHyperparams {
        ForestHyperparams { n_estimators: 1, bootstrap: false, ..Default::default() }
    }

    #[test]
    fn single_full_tree_memorises() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let ys: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random(), rng.random::<f64>() * 10.0]).collect();
        let (x, y) = (Matrix::from_rows(&rows).unwrap(), Matrix::from_rows(&ys).unwrap());
        let m = fit_forest(&x, &y, &single_tree()).unwrap();
        for (i, y) in ys.iter().enumerate() {
            assert_eq!(&m.predict(x.row(i)).unwrap(), y);
        }
    }

    #[test]
    fn constant_targets() {
        let x = Matrix::column(&[0.1, 0.2, 0.7, 0.9, 1.3]);
        let y = Matrix::column(&[0.1; 5]);
        let m = fit_forest(&x, &y, &ForestHyperparams { n_estimators: 7, ..Default::default() }).unwrap();
        for q in [-100.0, 0.5, 42.0] {
            assert_eq!(m.predict(&[q]).unwrap(), vec![0.1]);
        }
        assert_eq!(ForestModel::constant(vec![3.0, -1.0], 2).predict(&[0.0, 9.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn beats_mean_baseline_on_identity() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let (x, y) = (Matrix::column(&xs), Matrix::column(&xs));
        let m = fit_forest(&x, &y, &ForestHyperparams { n_estimators: 50, seed: 3, ..Default::default() }).unwrap();
        let pred = m.predict_batch(&x).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let baseline = mae(&xs, &vec![mean; xs.len()]).unwrap();
        assert!(mae(&xs, pred.as_slice()).unwrap() < baseline);
    }

    #[test]
    fn far_queries_and_identical_queries() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|v| v * v).collect();
        let m = fit_forest(&Matrix::column(&xs), &Matrix::column(&ys), &ForestHyperparams::default()).unwrap();
        for q in [-1e9, 1e9] {
            let p = m.predict(&[q]).unwrap()[0];
            assert!((0.0..=841.0).contains(&p));
        }
        let batch = m.predict_batch(&Matrix::column(&[12.5, 12.5])).unwrap();
        assert_eq!(batch.row(0), batch.row(1));
    }

    #[test]
    fn errors() {
        let x = Matrix::column(&[1.0, 2.0, 3.0]);
        let y = Matrix::column(&[1.0, 2.0]);
        assert!(matches!(fit_forest(&x, &y, &Default::default()), Err(MlError::ShapeMismatch { .. })));
        let y = Matrix::column(&[1.0, 2.0, 3.0]);
        let h = ForestHyperparams { min_samples_leaf: 2, ..Default::default() };
        assert_eq!(fit_forest(&x, &y, &h), Err(MlError::TooFewSamples { needed: 4, got: 3 }));
        let m = fit_forest(&x, &y, &Default::default()).unwrap();
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(MlError::ShapeMismatch { .. })));
        let h = ForestHyperparams { subsample: 0.0, ..Default::default() };
        assert!(matches!(fit_forest(&x, &y, &h), Err(MlError::InvalidHyperparams(_))));
    }

    #[test]
    fn depth_limit_is_respected() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let h = ForestHyperparams { max_depth: Some(3), n_estimators: 5, ..Default::default() };
        let m = fit_forest(&Matrix::column(&xs), &Matrix::column(&xs), &h).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.random::<f64>() * 1e-3, rng.random::<f64>() * 1e4]).collect();
        let ys: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0].sin() + r[1].ln(), r[0] * r[1] / 3.0]).collect();
        let (x, y) = (Matrix::from_rows(&rows).unwrap(), Matrix::from_rows(&ys).unwrap());
        let h = ForestHyperparams { n_estimators: 20, max_features: MaxFeatures::Fraction(0.5), subsample: 0.8, ..Default::default() };
        let m = fit_forest(&x, &y, &h).unwrap();
        let back = ForestModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        for r in &rows {
            let (a, b) = (m.predict(r).unwrap(), back.predict(r).unwrap());
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        assert!(ForestModel::from_json(&m.to_json().unwrap().replace(FOREST_FORMAT, "other")).is_err());
    }

    #[test]
    fn parallel_equals_serial() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let ys: Vec<f64> = xs.iter().map(|v| v * 3.0 + 1.0).collect();
        let (x, y) = (Matrix::column(&xs), Matrix::column(&ys));
        let h = ForestHyperparams { n_estimators: 16, seed: 5, ..Default::default() };
        let parallel = fit_forest(&x, &y, &h).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| fit_forest(&x, &y, &h).unwrap());
        assert_eq!(parallel, serial);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn predictions_stay_in_target_range(
            data in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -5.0f64..5.0, 0.0f64..100.0), 4..40),
            q in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..10),
            seed in 0u64..1000,
        ) {
            let x = Matrix::from_rows(&data.iter().map(|d| vec![d.0, d.1]).collect::<Vec<_>>()).unwrap();
            let y = Matrix::from_rows(&data.iter().map(|d| vec![d.2, d.3]).collect::<Vec<_>>()).unwrap();
            let h = ForestHyperparams { n_estimators: 8, seed, max_features: MaxFeatures::Count(1), ..Default::default() };
            let m = fit_forest(&x, &y, &h).unwrap();
            for (a, b) in q {
                let p = m.predict(&[a, b]).unwrap();
                for (j, v) in p.iter().enumerate() {
                    let col: Vec<f64> = (0..x.rows()).map(|i| y.get(i, j)).collect();
                    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(*v >= lo && *v <= hi);
                }
            }
            prop_assert_eq!(fit_forest(&x, &y, &h).unwrap(), m);
        }
    }
}
