//! Axial finite-difference derivatives of `B_z` along the z cut line.

use nalgebra::Vector3;
use serde::Serialize;

use super::{FieldError, FieldSample};

/// Default finite-difference step (m).
pub const DEFAULT_STEP: f64 = 1e-5;

/// Largest step-halving disagreement tolerated before reporting non-convergence.
const MAX_DISAGREEMENT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxialDerivative {
    pub order: usize,
    /// Richardson-extrapolated `dⁿB_z/dzⁿ` (T/mⁿ).
    pub value: f64,
    /// Truncation-error estimate from step halving.
    pub error_estimate: f64,
}

/// `(offsets in units of h, coefficients, divisor power)` of the central stencils.
fn stencil(order: usize) -> (&'static [f64], &'static [f64]) {
    match order {
        1 => (&[-1.0, 1.0], &[-0.5, 0.5]),
        2 => (&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0]),
        3 => (&[-2.0, -1.0, 1.0, 2.0], &[-0.5, 1.0, -1.0, 0.5]),
        4 => (&[-2.0, -1.0, 0.0, 1.0, 2.0], &[1.0, -4.0, 6.0, -4.0, 1.0]),
        _ => unreachable!("order validated by caller"),
    }
}

fn central_difference<F>(field: &F, z0: f64, order: usize, h: f64) -> Result<(f64, f64), FieldError>
where
    F: Fn(&Vector3<f64>) -> Result<FieldSample, FieldError>,
{
    let (offsets, coeffs) = stencil(order);
    let mut acc = 0.0;
    let mut fmax = 0.0_f64;
    let mut coef_sum = 0.0;
    for (&k, &c) in offsets.iter().zip(coeffs) {
        let bz = field(&Vector3::new(0.0, 0.0, z0 + k * h))?.b.z;
        acc += c * bz;
        fmax = fmax.max(bz.abs());
        coef_sum += c.abs();
    }
    let scale = h.powi(order as i32);
    let noise = 64.0 * f64::EPSILON * fmax * coef_sum / scale;
    Ok((acc / scale, noise))
}

/// Derivatives `d^n B_z / dz^n` for `n = 1..=max_order` at `(0, 0, z0)`.
///
/// Each order is evaluated with steps `h` and `h/2`; the returned value is
/// the Richardson extrapolation and the error estimate is a third of the
/// disagreement. A disagreement above 1% (outside rounding noise) is an error.
pub fn axial_derivatives<F>(
    field: F,
    z0: f64,
    max_order: usize,
    step: f64,
) -> Result<Vec<AxialDerivative>, FieldError>
where
    F: Fn(&Vector3<f64>) -> Result<FieldSample, FieldError>,
{
    if !(1..=4).contains(&max_order) {
        return Err(FieldError::InvalidRequest(format!(
            "max_order must be in 1..=4, got {max_order}"
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(FieldError::InvalidRequest(format!(
            "step must be > 0, got {step}"
        )));
    }
    (1..=max_order)
        .map(|order| {
            let (coarse, _) = central_difference(&field, z0, order, step)?;
            let (fine, noise) = central_difference(&field, z0, order, 0.5 * step)?;
            let diff = (fine - coarse).abs();
            if diff > noise && diff > MAX_DISAGREEMENT * fine.abs() {
                return Err(FieldError::NonConvergence {
                    order,
                    disagreement: diff / fine.abs().max(f64::MIN_POSITIVE),
                });
            }
            Ok(AxialDerivative {
                order,
                value: fine + (fine - coarse) / 3.0,
                error_estimate: diff / 3.0,
            })
        })
        .collect()
}
