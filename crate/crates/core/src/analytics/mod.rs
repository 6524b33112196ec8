//! IC/DV curves, relaxation derivatives and DRT.

pub mod curves;
pub mod drt;
pub mod error;

pub use curves::{dv_curve, ic_curve, moving_average, relaxation_derivative, DV_EPSILON};
pub use drt::{default_tau_grid, drt, drt_fit, DrtResult, DEFAULT_LAMBDA, DEFAULT_TAU_POINTS};
pub use error::AnalyticsError;
