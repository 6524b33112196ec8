use serde::{Deserialize, Serialize};

use super::error::MlError;
use super::forest::{fit_forest, ForestHyperparams, ForestModel};
use super::grid::{grid_search, GridSearchResult, GridSearchSpec};
use super::matrix::Matrix;

/// How a pipeline stage fits each of its forests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub hyperparams: ForestHyperparams,
    /// When present, hyperparameters come from this grid wherever the
    /// training set holds at least `2 * folds` rows. Omitted means the
    /// default grid; `null` disables the search.
    #[serde(default = "default_grid")]
    pub grid: Option<GridSearchSpec>,
}

fn default_grid() -> Option<GridSearchSpec> {
    Some(GridSearchSpec::default())
}

impl TrainOptions {
    /// Route every seed through `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.hyperparams.seed = seed;
        if let Some(g) = &mut out.grid {
            g.seed = seed;
        }
        out
    }
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { hyperparams: ForestHyperparams::default(), grid: Some(GridSearchSpec::default()) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: ForestModel,
    pub search: Option<GridSearchResult>,
}

/// Fit a forest on however many rows are available: one row gives a
/// constant model, small sets shrink `min_samples_leaf`, larger sets run
/// the grid search when configured.
pub fn fit_adaptive(x: &Matrix, y: &Matrix, opts: &TrainOptions) -> Result<FitReport, MlError> {
    let n = x.rows();
    if n == 0 {
        return Err(MlError::EmptyInput);
    }
    if x.rows() != y.rows() {
        return Err(MlError::ShapeMismatch { expected: x.rows(), found: y.rows() });
    }
    if n == 1 {
        return Ok(FitReport { model: ForestModel::constant(y.row(0).to_vec(), x.cols()), search: None });
    }
    if let Some(spec) = &opts.grid {
        if spec.folds >= 2 && n >= 2 * spec.folds {
            let smallest_train = n - n.div_ceil(spec.folds);
            let mut spec = spec.clone();
            spec.min_samples_leaf.retain(|&m| 2 * m <= smallest_train);
            if spec.min_samples_leaf.is_empty() {
                spec.min_samples_leaf.push(1);
            }
            let search = grid_search(x, y, &spec)?;
            let model = fit_forest(x, y, &search.best)?;
            return Ok(FitReport { model, search: Some(search) });
        }
    }
    let mut h = opts.hyperparams;
    h.min_samples_leaf = h.min_samples_leaf.min(n / 2).max(1);
    Ok(FitReport { model: fit_forest(x, y, &h)?, search: None })
}
