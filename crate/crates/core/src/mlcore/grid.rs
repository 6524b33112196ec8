use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::error::MlError;
use super::forest::{fit_forest, ForestHyperparams, MaxFeatures};
use super::matrix::Matrix;
use super::metrics::Scoring;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSearchSpec {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
    pub subsample: Vec<f64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_scoring")]
    pub scoring: Scoring,
    #[serde(default)]
    pub seed: u64,
}

fn default_bootstrap() -> bool {
    true
}

fn default_folds() -> usize {
    5
}

fn default_scoring() -> Scoring {
    Scoring::Mae
}

impl Default for GridSearchSpec {
    fn default() -> Self {
        GridSearchSpec {
            n_estimators: vec![100, 300],
            max_depth: vec![None, Some(16)],
            min_samples_leaf: vec![1, 4],
            max_features: vec![MaxFeatures::Fraction(1.0), MaxFeatures::Fraction(0.5)],
            subsample: vec![1.0],
            bootstrap: true,
            folds: 5,
            scoring: Scoring::Mae,
            seed: 0,
        }
    }
}

impl GridSearchSpec {
    /// A grid holding exactly `h`.
    pub fn single(h: &ForestHyperparams, folds: usize, scoring: Scoring) -> Self {
        GridSearchSpec {
            n_estimators: vec![h.n_estimators],
            max_depth: vec![h.max_depth],
            min_samples_leaf: vec![h.min_samples_leaf],
            max_features: vec![h.max_features],
            subsample: vec![h.subsample],
            bootstrap: h.bootstrap,
            folds,
            scoring,
            seed: h.seed,
        }
    }

    /// Cartesian product, first list outermost.
    pub fn combinations(&self) -> Vec<ForestHyperparams> {
        let mut out = Vec::new();
        for &n_estimators in &self.n_estimators {
            for &max_depth in &self.max_depth {
                for &min_samples_leaf in &self.min_samples_leaf {
                    for &max_features in &self.max_features {
                        for &subsample in &self.subsample {
                            out.push(ForestHyperparams {
                                n_estimators,
                                max_depth,
                                min_samples_leaf,
                                max_features,
                                subsample,
                                bootstrap: self.bootstrap,
                                seed: self.seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub hyperparams: ForestHyperparams,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: ForestHyperparams,
    pub best_score: f64,
    pub table: Vec<GridRow>,
}

/// Shuffled fold assignment; fold sizes differ by at most one.
pub fn fold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % folds].push(i);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

pub fn cross_val_score(x: &Matrix, y: &Matrix, h: &ForestHyperparams, folds: usize, scoring: Scoring, seed: u64) -> Result<Vec<f64>, MlError> {
    let n = x.rows();
    if folds < 2 || folds > n {
        return Err(MlError::TooFewSamples { needed: folds.max(2), got: n });
    }
    fold_indices(n, folds, seed)
        .iter()
        .map(|held| {
            let train: Vec<usize> = (0..n).filter(|i| held.binary_search(i).is_err()).collect();
            let model = fit_forest(&x.select_rows(&train), &y.select_rows(&train), h)?;
            let pred = model.predict_batch(&x.select_rows(held))?;
            scoring.score(y.select_rows(held).as_slice(), pred.as_slice())
        })
        .collect()
}

/// Exhaustive k-fold search. Lower scores win; ties go to the earliest
/// combination.
pub fn grid_search(x: &Matrix, y: &Matrix, spec: &GridSearchSpec) -> Result<GridSearchResult, MlError> {
    let combos = spec.combinations();
    if combos.is_empty() {
        return Err(MlError::EmptyGrid);
    }
    if x.rows() != y.rows() {
        return Err(MlError::ShapeMismatch { expected: x.rows(), found: y.rows() });
    }
    let table: Vec<GridRow> = combos
        .into_par_iter()
        .map(|h| {
            let fold_scores = cross_val_score(x, y, &h, spec.folds, spec.scoring, spec.seed)?;
            let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
            Ok(GridRow { hyperparams: h, fold_scores, mean_score })
        })
        .collect::<Result<_, MlError>>()?;
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_score < table[best].mean_score {
            best = i;
        }
    }
    Ok(GridSearchResult { best: table[best].hyperparams, best_score: table[best].mean_score, table })
}
