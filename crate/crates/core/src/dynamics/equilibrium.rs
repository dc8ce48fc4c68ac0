//! Time-averaged equilibrium of the trapped magnet.
//!
//! With the moment held along +z, the AC force `F₁ cos(Ωt)` with
//! `F₁ = μ∇B₁z` averages to the ponderomotive potential `|F₁|²/(4mΩ²)`.
//! The equilibrium balances that against the bias force, gravity and any
//! offset force.

use nalgebra::{Matrix3, Vector3};

use super::{DynamicsError, TrapFields};
use crate::secular::{MagnetSpec, OperatingPoint};
use crate::STANDARD_GRAVITY;

/// Finite-difference step for the potential gradient (m).
const POTENTIAL_STEP: f64 = 2e-7;
/// Finite-difference step for the Newton Jacobian (m).
const NEWTON_STEP: f64 = 2e-6;
/// Largest Newton update (m).
const MAX_UPDATE: f64 = 1e-4;
/// Search radius around the starting point (m).
const MAX_EXCURSION: f64 = 5e-4;

/// `|μ∇B₁z|²/(4mΩ²)` at `r`.
pub fn ponderomotive_potential(
    fields: &TrapFields,
    spec: &MagnetSpec,
    r: &Vector3<f64>,
) -> Result<f64, DynamicsError> {
    let jac = fields
        .ac_amplitude(r, true)?
        .jacobian
        .expect("jacobian requested");
    let f1 = spec.moment() * jac.row(2).transpose();
    let w = fields.drive.omega_drive;
    Ok(f1.norm_squared() / (4.0 * spec.mass() * w * w))
}

/// Net time-averaged force at `r`.
fn mean_force(
    fields: &TrapFields,
    spec: &MagnetSpec,
    gravity_on: bool,
    offset: &Vector3<f64>,
    r: &Vector3<f64>,
) -> Result<Vector3<f64>, DynamicsError> {
    let jac = fields
        .static_part(r, true)?
        .jacobian
        .expect("jacobian requested");
    let mut f = spec.moment() * jac.row(2).transpose() + offset;
    if gravity_on {
        f.z -= spec.mass() * STANDARD_GRAVITY;
    }
    if fields.drive_on && fields.drive.i_trap != 0.0 {
        for axis in 0..3 {
            let mut e = Vector3::zeros();
            e[axis] = POTENTIAL_STEP;
            let up = ponderomotive_potential(fields, spec, &(r + e))?;
            let down = ponderomotive_potential(fields, spec, &(r - e))?;
            f[axis] -= (up - down) / (2.0 * POTENTIAL_STEP);
        }
    }
    Ok(f)
}

/// Newton search for the stable time-averaged equilibrium near `guess`.
pub fn find_equilibrium(
    fields: &TrapFields,
    spec: &MagnetSpec,
    gravity_on: bool,
    offset_force: &Vector3<f64>,
    guess: &Vector3<f64>,
) -> Result<Vector3<f64>, DynamicsError> {
    let mut r = *guess;
    let weight = spec.mass() * STANDARD_GRAVITY;
    let mut stiffness = Matrix3::zeros();
    for _ in 0..60 {
        let f = mean_force(fields, spec, gravity_on, offset_force, &r)?;
        for axis in 0..3 {
            let mut e = Vector3::zeros();
            e[axis] = NEWTON_STEP;
            let up = mean_force(fields, spec, gravity_on, offset_force, &(r + e))?;
            let down = mean_force(fields, spec, gravity_on, offset_force, &(r - e))?;
            stiffness.set_column(axis, &((up - down) / (2.0 * NEWTON_STEP)));
        }
        let mut delta = match stiffness.lu().solve(&(-f)) {
            // a Newton step against the force heads for a saddle or maximum
            Some(d) if d.dot(&f) > 0.0 || f.norm() < 1e-9 * weight => d,
            _ => f * (MAX_UPDATE / f.norm().max(f64::MIN_POSITIVE)),
        };
        if delta.norm() > MAX_UPDATE {
            delta *= MAX_UPDATE / delta.norm();
        }
        r += delta;
        if (r - guess).norm() > MAX_EXCURSION {
            return Err(DynamicsError::NoEquilibrium(format!(
                "no confining minimum within {MAX_EXCURSION:e} m of the starting point"
            )));
        }
        if delta.norm() < 1e-13 && f.norm() < 1e-9 * weight {
            let sym = 0.5 * (stiffness + stiffness.transpose());
            if sym.symmetric_eigenvalues().iter().any(|&k| k >= 0.0) {
                return Err(DynamicsError::NoEquilibrium(format!(
                    "force balance at {r:?} is not a stable minimum"
                )));
            }
            return Ok(r);
        }
    }
    Err(DynamicsError::NoEquilibrium(format!(
        "Newton iteration did not converge (last position {r:?})"
    )))
}

/// Local `Ω`, `|∂²B₁z/∂z²|`, `|B₀|` and `∂B₀z/∂z` at `r`.
pub fn local_operating_point(
    fields: &TrapFields,
    r: &Vector3<f64>,
) -> Result<OperatingPoint, DynamicsError> {
    let h = 1e-7;
    let dz = Vector3::new(0.0, 0.0, h);
    let up = fields
        .ac_amplitude(&(r + dz), true)?
        .jacobian
        .expect("jacobian requested");
    let down = fields
        .ac_amplitude(&(r - dz), true)?
        .jacobian
        .expect("jacobian requested");
    let bias = fields.static_part(r, true)?;
    Ok(OperatingPoint {
        omega_drive: fields.drive.omega_drive,
        b1_curvature: ((up[(2, 2)] - down[(2, 2)]) / (2.0 * h)).abs(),
        b0: bias.b.norm(),
        b0_gradient: bias.jacobian.expect("jacobian requested")[(2, 2)],
    })
}
