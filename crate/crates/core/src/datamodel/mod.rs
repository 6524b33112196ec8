//! Domain types, dataset I/O, splitting, resampling and synthetic data.

pub mod error;
pub mod io;
pub mod resample;
pub mod split;
pub mod synth;
pub mod types;

pub use error::{DataError, ValidationError};
pub use io::{load_cells, save_cells, SCHEMA_VERSION};
pub use resample::{resample_time_curve, resample_values, resample_voltage_curve};
pub use split::{split_by_policy, SplitPolicy, CONDITION_KEY};
pub use synth::{synth_generate, SynthConfig, SynthModel};
pub use types::*;
