//! Simulation and analysis toolkit for a ferromagnetic cube levitated in a
//! planar alternating-current magnetic Paul trap.
//!
//! The crate is organised along the characterisation pipeline:
//!
//! * [`magnetostatics`]: bias and trap fields of circular current filaments,
//!   axial derivatives and calibration tables.
//! * [`secular`]: closed-form Mathieu-regime predictions (q-parameter,
//!   vibrational and librational frequencies, stability class).
//! * [`dynamics`]: time-domain rigid-dipole simulation (RK4, quaternions).
//! * [`spectral`]: PSD estimation, Lorentzian peak fits, mode tracking and
//!   ringdown fits.
//! * [`sweep`]: parameter sweeps, scaling-law fits and canned figure plans.
//! * [`config`]: the strict run-configuration schema shared with the CLI.

pub mod config;
pub mod dynamics;
pub mod fit;
pub mod magnetostatics;
pub mod secular;
pub mod spectral;
pub mod sweep;

/// Vacuum permeability (N/A²), the value the trap calibrations are quoted with.
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Standard gravitational acceleration (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.806_65;

pub use nalgebra::{Matrix3, Vector3};
