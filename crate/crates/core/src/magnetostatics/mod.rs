//! Static bias and AC trap fields from circular current filaments.
//!
//! Every loop is modeled as a filament at its track centerline; multi-turn
//! coils are `turns` co-located filaments. All functions are pure.

mod calibration;
mod derivatives;
mod elliptic;
mod filament;
mod trap;

use thiserror::Error;

pub use calibration::{
    calibration_tables, trap_curvature, write_calibration_csv, CalibrationRow, CalibrationSettings,
    CALIBRATION_HEADER,
};
pub use derivatives::{axial_derivatives, AxialDerivative, DEFAULT_STEP};
pub use elliptic::ellip_ke;
pub use filament::{loop_field, loop_field_on_axis, FieldSample, LoopGeometry, SINGULAR_DISTANCE};
pub use trap::{
    bias_field, trap_field, trap_field_amplitude, BiasParams, DriveParams, TrapGeometry,
    DEFAULT_XI, HELMHOLTZ_RADIUS, HELMHOLTZ_TURNS, INNER_RADIUS, OUTER_RADIUS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("evaluation point {point:?} lies {distance:e} m from a filament")]
    SingularPoint { point: [f64; 3], distance: f64 },
    #[error("axial derivative of order {order} did not converge (step-halving disagreement {disagreement:.3e})")]
    NonConvergence { order: usize, disagreement: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid drive: {0}")]
    InvalidDrive(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}
