//! Trap loops and Helmholtz bias coils.

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::filament::{loop_field, loop_field_on_axis, FieldSample, LoopGeometry};
use super::FieldError;
use crate::MU_0;

/// Inner trap-loop radius (m), measured to the track centerline.
pub const INNER_RADIUS: f64 = 0.7e-3;
/// Outer trap-loop radius (m).
pub const OUTER_RADIUS: f64 = 1.4e-3;
/// Helmholtz coil radius (m).
pub const HELMHOLTZ_RADIUS: f64 = 10e-3;
/// Windings per Helmholtz coil.
pub const HELMHOLTZ_TURNS: u32 = 835;
/// Default outer/inner current ratio.
pub const DEFAULT_XI: f64 = 2.2;

/// Field sources: two coplanar trap loops and two bias coils.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapGeometry {
    pub inner_loop: LoopGeometry,
    pub outer_loop: LoopGeometry,
    pub top_coil: LoopGeometry,
    pub bottom_coil: LoopGeometry,
}

impl Default for TrapGeometry {
    fn default() -> Self {
        Self::with_coil_separation(HELMHOLTZ_RADIUS)
    }
}

impl TrapGeometry {
    /// Default trap with the bias coils `separation` apart, centered on the
    /// trap plane.
    pub fn with_coil_separation(separation: f64) -> Self {
        Self {
            inner_loop: LoopGeometry {
                radius: INNER_RADIUS,
                axial_offset: 0.0,
                turns: 1,
            },
            outer_loop: LoopGeometry {
                radius: OUTER_RADIUS,
                axial_offset: 0.0,
                turns: 1,
            },
            top_coil: LoopGeometry {
                radius: HELMHOLTZ_RADIUS,
                axial_offset: 0.5 * separation,
                turns: HELMHOLTZ_TURNS,
            },
            bottom_coil: LoopGeometry {
                radius: HELMHOLTZ_RADIUS,
                axial_offset: -0.5 * separation,
                turns: HELMHOLTZ_TURNS,
            },
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        self.inner_loop.validate("inner_loop")?;
        self.outer_loop.validate("outer_loop")?;
        self.top_coil.validate("top_coil")?;
        self.bottom_coil.validate("bottom_coil")?;
        if self.outer_loop.radius <= self.inner_loop.radius {
            return Err(FieldError::InvalidGeometry(
                "TrapGeometry: outer_loop.radius must exceed inner_loop.radius".into(),
            ));
        }
        if !(self.top_coil.axial_offset > 0.0 && self.bottom_coil.axial_offset < 0.0) {
            return Err(FieldError::InvalidGeometry(
                "TrapGeometry: top_coil.axial_offset > 0 > bottom_coil.axial_offset required"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// AC drive of the trap loops: inner `I cos(Ωt+φ)`, outer `−ξ I cos(Ωt+φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Inner-loop current amplitude (A).
    pub i_trap: f64,
    /// Outer/inner current ratio.
    pub xi: f64,
    /// Drive angular frequency Ω (rad/s).
    pub omega_drive: f64,
    /// Drive phase (rad).
    pub phase: f64,
}

impl DriveParams {
    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.i_trap.is_finite() && self.i_trap >= 0.0) {
            return Err(FieldError::InvalidDrive(format!(
                "DriveParams.i_trap must be >= 0, got {}",
                self.i_trap
            )));
        }
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(FieldError::InvalidDrive(format!(
                "DriveParams.xi must be > 0, got {}",
                self.xi
            )));
        }
        if !(self.omega_drive.is_finite() && self.omega_drive > 0.0) {
            return Err(FieldError::InvalidDrive(format!(
                "DriveParams.omega_drive must be > 0, got {}",
                self.omega_drive
            )));
        }
        if !self.phase.is_finite() {
            return Err(FieldError::InvalidDrive(
                "DriveParams.phase must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Drive frequency Ω/(2π) in Hz.
    pub fn frequency_hz(&self) -> f64 {
        self.omega_drive / (2.0 * std::f64::consts::PI)
    }
}

/// DC currents in the top and bottom bias coils (A).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasParams {
    pub i_top: f64,
    pub i_bottom: f64,
}

impl BiasParams {
    /// Coil currents producing `B_z(0) = b0` and `∂B_z/∂z(0) = gradient` at the
    /// trap center.
    pub fn from_targets(geom: &TrapGeometry, b0: f64, gradient: f64) -> Result<Self, FieldError> {
        let (top_b, top_g) = on_axis_value_and_slope(&geom.top_coil);
        let (bot_b, bot_g) = on_axis_value_and_slope(&geom.bottom_coil);
        let system = Matrix2::new(top_b, bot_b, top_g, bot_g);
        let currents = system
            .lu()
            .solve(&Vector2::new(b0, gradient))
            .ok_or_else(|| {
                FieldError::InvalidGeometry(
                    "bias coils cannot independently set field and gradient".into(),
                )
            })?;
        Ok(Self {
            i_top: currents.x,
            i_bottom: currents.y,
        })
    }
}

/// Unit-current on-axis field and its z-slope at the origin.
fn on_axis_value_and_slope(coil: &LoopGeometry) -> (f64, f64) {
    let a = coil.radius;
    let s = -coil.axial_offset;
    let n = f64::from(coil.turns);
    let b = loop_field_on_axis(coil, 1.0, 0.0);
    let slope = -3.0 * MU_0 * n * a * a * s / (2.0 * (a * a + s * s).powf(2.5));
    (b, slope)
}

/// Spatial amplitude of the trap field (the factor multiplying `cos(Ωt+φ)`).
pub fn trap_field_amplitude(
    geom: &TrapGeometry,
    drive: &DriveParams,
    point: &Vector3<f64>,
    with_jacobian: bool,
) -> Result<FieldSample, FieldError> {
    let mut total = loop_field(&geom.inner_loop, drive.i_trap, point, with_jacobian)?;
    let outer = loop_field(
        &geom.outer_loop,
        -drive.xi * drive.i_trap,
        point,
        with_jacobian,
    )?;
    total.accumulate(&outer, 1.0);
    Ok(total)
}

/// Instantaneous trap field `B₁(r, t)`.
pub fn trap_field(
    geom: &TrapGeometry,
    drive: &DriveParams,
    point: &Vector3<f64>,
    t: f64,
    with_jacobian: bool,
) -> Result<FieldSample, FieldError> {
    let amplitude = trap_field_amplitude(geom, drive, point, with_jacobian)?;
    Ok(amplitude.scaled((drive.omega_drive * t + drive.phase).cos()))
}

/// Static bias field from the two coils.
pub fn bias_field(
    geom: &TrapGeometry,
    bias: &BiasParams,
    point: &Vector3<f64>,
    with_jacobian: bool,
) -> Result<FieldSample, FieldError> {
    let mut total = loop_field(&geom.top_coil, bias.i_top, point, with_jacobian)?;
    let bottom = loop_field(&geom.bottom_coil, bias.i_bottom, point, with_jacobian)?;
    total.accumulate(&bottom, 1.0);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(i: f64, xi: f64) -> DriveParams {
        DriveParams {
            i_trap: i,
            xi,
            omega_drive: 2.0 * std::f64::consts::PI * 150.0,
            phase: 0.0,
        }
    }

    #[test]
    fn default_geometry_is_valid() {
        let g = TrapGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.inner_loop.radius, 0.7e-3);
        assert_eq!(g.outer_loop.radius, 1.4e-3);
        assert_eq!(g.top_coil.turns, 835);
    }

    #[test]
    fn geometry_invariants() {
        let mut g = TrapGeometry::default();
        g.outer_loop.radius = 0.5e-3;
        assert!(g.validate().is_err());
        let mut g = TrapGeometry::default();
        g.bottom_coil.axial_offset = 1e-3;
        assert!(g.validate().is_err());
    }

    #[test]
    fn center_cancellation_at_radius_ratio() {
        let g = TrapGeometry::default();
        let f = trap_field(&g, &drive(0.8, 2.0), &Vector3::zeros(), 0.0, false).unwrap();
        assert!(f.b.z.abs() < 1e-18);
    }

    #[test]
    fn center_field_for_xi_2_2() {
        let g = TrapGeometry::default();
        let f = trap_field(&g, &drive(1.0, 2.2), &Vector3::zeros(), 0.0, false).unwrap();
        // (μ₀/2)(1/R₁ − ξ/R₂)
        let expect = 0.5 * MU_0 * (1.0 / 0.7e-3 - 2.2 / 1.4e-3);
        assert!((f.b.z - expect).abs() < 1e-12 * expect.abs());
        assert!((f.b.z + 8.976e-5).abs() < 1e-8);
    }

    #[test]
    fn cosine_zero_crossing() {
        let g = TrapGeometry::default();
        let d = drive(1.0, 2.2);
        let t = std::f64::consts::FRAC_PI_2 / d.omega_drive;
        let f = trap_field(&g, &d, &Vector3::new(2e-4, -1e-4, 3e-4), t, true).unwrap();
        assert!(f.b.norm() < 1e-19);
    }

    #[test]
    fn helmholtz_center_field() {
        let g = TrapGeometry::default();
        let bias = BiasParams {
            i_top: 0.1,
            i_bottom: 0.1,
        };
        let f = bias_field(&g, &bias, &Vector3::zeros(), true).unwrap();
        let expect = 0.8_f64.powf(1.5) * MU_0 * 835.0 * 0.1 / 10e-3;
        assert!((f.b.z / expect - 1.0).abs() < 1e-12);
        assert!((f.b.z - 7.51e-3).abs() < 1e-5);
        let j = f.jacobian.unwrap();
        assert!(j[(2, 2)].abs() < 1e-12 * f.b.z / 10e-3);
    }

    #[test]
    fn anti_helmholtz() {
        let g = TrapGeometry::default();
        let bias = BiasParams {
            i_top: 0.1,
            i_bottom: -0.1,
        };
        let f = bias_field(&g, &bias, &Vector3::zeros(), true).unwrap();
        assert!(f.b.z.abs() < 1e-18);
        assert!(f.jacobian.unwrap()[(2, 2)].abs() > 0.1);
    }

    #[test]
    fn bias_targets_round_trip() {
        let g = TrapGeometry::default();
        let bias = BiasParams::from_targets(&g, 5.6e-3, 81e-3).unwrap();
        let f = bias_field(&g, &bias, &Vector3::zeros(), true).unwrap();
        assert!((f.b.z - 5.6e-3).abs() < 1e-15);
        assert!((f.jacobian.unwrap()[(2, 2)] - 81e-3).abs() < 1e-12);
    }
}
