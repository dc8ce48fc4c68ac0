//! Rigid-body dynamics of the levitated dipole.
//!
//! The magnet is a rigid, uniformly magnetized cube whose moment is fixed
//! along the body z axis. Translation and rotation are integrated together
//! with fixed-step RK4; the orientation is a body-to-lab unit quaternion and
//! the angular velocity is expressed in the lab frame.

mod equilibrium;
mod forces;
mod sim;
mod state;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::magnetostatics::{
    bias_field, trap_field_amplitude, BiasParams, DriveParams, FieldError, FieldSample,
    TrapGeometry,
};

pub use equilibrium::{find_equilibrium, local_operating_point, ponderomotive_potential};
pub use forces::{
    dipole_force, dipole_torque, equilibrium_gradient, gauss_legendre, point_dipole_load,
    volume_averaged_force, volume_averaged_load, BodyLoad, CubeQuadrature,
};
pub use sim::{
    default_dt, mechanical_energy, simulate, step, ForceModel, InertiaModel, InitialConditions,
    SimConfig, Simulator, Timing, Trajectory, TRAJECTORY_HEADER,
};
pub use state::RigidState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("magnet escaped past {radius:e} m at t = {time} s")]
    Escape { time: f64, radius: f64 },
    #[error("state became non-finite at t = {time} s")]
    NonFinite { time: f64 },
    #[error("equilibrium search failed: {0}")]
    NoEquilibrium(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Anything that supplies `B(r, t)` and optionally its Jacobian.
pub trait FieldSource: Sync {
    fn field(
        &self,
        r: &Vector3<f64>,
        t: f64,
        with_jacobian: bool,
    ) -> Result<FieldSample, FieldError>;

    /// True when the field does not depend on time, so energy is conserved.
    fn is_static(&self) -> bool;
}

/// `B(r) = b + G r`; `G` should be symmetric and traceless to be physical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearField {
    pub b: Vector3<f64>,
    pub gradient: Matrix3<f64>,
}

impl LinearField {
    pub fn new(b: Vector3<f64>, gradient: Matrix3<f64>) -> Self {
        Self { b, gradient }
    }

    pub fn uniform(b: Vector3<f64>) -> Self {
        Self::new(b, Matrix3::zeros())
    }
}

impl FieldSource for LinearField {
    fn field(
        &self,
        r: &Vector3<f64>,
        _t: f64,
        with_jacobian: bool,
    ) -> Result<FieldSample, FieldError> {
        Ok(FieldSample {
            b: self.b + self.gradient * r,
            jacobian: with_jacobian.then_some(self.gradient),
        })
    }

    fn is_static(&self) -> bool {
        true
    }
}

/// Bias coils plus the AC trap drive (optionally switched off).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapFields {
    pub geom: TrapGeometry,
    pub drive: DriveParams,
    pub bias: BiasParams,
    pub drive_on: bool,
}

impl TrapFields {
    pub fn new(geom: TrapGeometry, drive: DriveParams, bias: BiasParams) -> Self {
        Self {
            geom,
            drive,
            bias,
            drive_on: true,
        }
    }

    /// Static bias field alone.
    pub fn static_part(
        &self,
        r: &Vector3<f64>,
        with_jacobian: bool,
    ) -> Result<FieldSample, FieldError> {
        bias_field(&self.geom, &self.bias, r, with_jacobian)
    }

    /// Spatial amplitude of the AC part.
    pub fn ac_amplitude(
        &self,
        r: &Vector3<f64>,
        with_jacobian: bool,
    ) -> Result<FieldSample, FieldError> {
        trap_field_amplitude(&self.geom, &self.drive, r, with_jacobian)
    }
}

impl FieldSource for TrapFields {
    fn field(
        &self,
        r: &Vector3<f64>,
        t: f64,
        with_jacobian: bool,
    ) -> Result<FieldSample, FieldError> {
        let mut total = self.static_part(r, with_jacobian)?;
        if self.drive_on && self.drive.i_trap != 0.0 {
            let phase = (self.drive.omega_drive * t + self.drive.phase).cos();
            total.accumulate(&self.ac_amplitude(r, with_jacobian)?, phase);
        }
        Ok(total)
    }

    fn is_static(&self) -> bool {
        !self.drive_on || self.drive.i_trap == 0.0
    }
}
