//! Forests, k-means, grid search and error metrics.

pub mod adaptive;
pub mod error;
pub mod forest;
pub mod grid;
pub mod kmeans;
pub mod matrix;
pub mod metrics;
pub mod tree;

pub use adaptive::{fit_adaptive, FitReport, TrainOptions};
pub use error::MlError;
pub use forest::{fit_forest, ForestHyperparams, ForestModel, MaxFeatures};
pub use grid::{cross_val_score, grid_search, GridRow, GridSearchResult, GridSearchSpec};
pub use kmeans::{kmeans, KMeansResult};
pub use matrix::Matrix;
pub use metrics::{mae, mape, pearson, rmse, Scoring};
