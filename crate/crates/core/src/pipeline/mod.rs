//! Configuration, staged training, evaluation reports and single-reading
//! inference over on-disk artifacts.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod infer;
pub mod report;
pub mod samples;
pub mod svg;
pub mod train;

pub use artifacts::{Artifacts, PresetReport};
pub use config::{soc_tag, PipelineConfig, Preset};
pub use error::PipelineError;
pub use evaluate::{evaluate, EvalReport, SplitName};
pub use infer::{infer, Inference};
pub use report::{EvalRow, PointRow, TrainMetricRow};
pub use train::{select_freqs, train, Stage};
