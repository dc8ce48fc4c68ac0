//! Field of a single circular current filament.
//!
//! Away from the symmetry axis the field follows from the complete elliptic
//! integrals. Close to the axis those closed forms lose precision through
//! cancellation (the Jacobian involves `1/ρ²` differences), so a truncated
//! off-axis expansion in `ρ²` built from the on-axis derivatives is used
//! instead. Both branches return the Jacobian in terms of the same smooth
//! quantities, which keeps it well defined on the axis itself.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::elliptic::ellip_ke;
use super::FieldError;
use crate::MU_0;

/// Points closer than this to the filament are rejected (m).
pub const SINGULAR_DISTANCE: f64 = 1e-9;

/// `ρ / sqrt(a² + s²)` below which the near-axis expansion is used.
const SERIES_THRESHOLD: f64 = 0.05;

/// Number of terms kept in the near-axis expansion.
const SERIES_TERMS: usize = 8;

/// A circular filament loop coaxial with the z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopGeometry {
    /// Loop radius (m).
    #[serde(rename = "radius_m")]
    pub radius: f64,
    /// z-position of the loop plane (m).
    #[serde(rename = "axial_offset_m")]
    pub axial_offset: f64,
    /// Number of co-located turns.
    pub turns: u32,
}

impl LoopGeometry {
    pub fn new(radius: f64, axial_offset: f64, turns: u32) -> Result<Self, FieldError> {
        let geom = Self {
            radius,
            axial_offset,
            turns,
        };
        geom.validate("loop")?;
        Ok(geom)
    }

    /// Checks the loop invariants; `name` labels the loop in the error.
    pub fn validate(&self, name: &str) -> Result<(), FieldError> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(FieldError::InvalidGeometry(format!(
                "{name}: LoopGeometry.radius must be > 0, got {}",
                self.radius
            )));
        }
        if !self.axial_offset.is_finite() {
            return Err(FieldError::InvalidGeometry(format!(
                "{name}: LoopGeometry.axial_offset must be finite"
            )));
        }
        if self.turns == 0 {
            return Err(FieldError::InvalidGeometry(format!(
                "{name}: LoopGeometry.turns must be >= 1"
            )));
        }
        Ok(())
    }
}

/// Magnetic field at a point, optionally with its Jacobian `J[i][j] = ∂B_i/∂x_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub b: Vector3<f64>,
    pub jacobian: Option<Matrix3<f64>>,
}

impl FieldSample {
    pub fn zero(with_jacobian: bool) -> Self {
        Self {
            b: Vector3::zeros(),
            jacobian: with_jacobian.then(Matrix3::zeros),
        }
    }

    /// `self += scale * other`. A missing Jacobian on either side drops it.
    pub fn accumulate(&mut self, other: &FieldSample, scale: f64) {
        self.b += other.b * scale;
        self.jacobian = match (self.jacobian, other.jacobian) {
            (Some(a), Some(b)) => Some(a + b * scale),
            _ => None,
        };
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.b *= scale;
        if let Some(j) = self.jacobian.as_mut() {
            *j *= scale;
        }
        self
    }
}

/// On-axis `B_z` of a loop: `μ₀ N I R² / (2 (R² + (z − z_loop)²)^{3/2})`.
pub fn loop_field_on_axis(geom: &LoopGeometry, current: f64, z: f64) -> f64 {
    let a = geom.radius;
    let s = z - geom.axial_offset;
    MU_0 * f64::from(geom.turns) * current * a * a / (2.0 * (a * a + s * s).powf(1.5))
}

/// Smooth axisymmetric building blocks of the field and its Jacobian:
/// `B_ρ = p ρ`, `∂B_ρ/∂ρ = p + q ρ²`, `∂B_z/∂ρ = s_z ρ`, `∂B_ρ/∂z = s_r ρ`,
/// `∂B_z/∂z = t`.
struct Axisymmetric {
    bz: f64,
    p: f64,
    q: f64,
    s_z: f64,
    s_r: f64,
    t: f64,
}

/// Full field of a loop at `point`, computing the Jacobian when requested.
pub fn loop_field(
    geom: &LoopGeometry,
    current: f64,
    point: &Vector3<f64>,
    with_jacobian: bool,
) -> Result<FieldSample, FieldError> {
    let a = geom.radius;
    let (x, y) = (point.x, point.y);
    let s = point.z - geom.axial_offset;
    let rho = x.hypot(y);
    let dist = (rho - a).hypot(s);
    if dist < SINGULAR_DISTANCE {
        return Err(FieldError::SingularPoint {
            point: [point.x, point.y, point.z],
            distance: dist,
        });
    }
    let amp = MU_0 * f64::from(geom.turns) * current;
    let r_axis = a.hypot(s);
    let parts = if rho < SERIES_THRESHOLD * r_axis {
        near_axis(a, rho, s, r_axis, amp)
    } else {
        elliptic(a, rho, s, amp)
    };

    let b = Vector3::new(parts.p * x, parts.p * y, parts.bz);
    let jacobian = with_jacobian.then(|| {
        let q = parts.q;
        Matrix3::new(
            parts.p + q * x * x,
            q * x * y,
            parts.s_r * x,
            q * x * y,
            parts.p + q * y * y,
            parts.s_r * y,
            parts.s_z * x,
            parts.s_z * y,
            parts.t,
        )
    });
    Ok(FieldSample { b, jacobian })
}

fn elliptic(a: f64, rho: f64, s: f64, amp: f64) -> Axisymmetric {
    let c = amp / std::f64::consts::PI;
    let alpha2 = (a - rho).powi(2) + s * s;
    let beta2 = (a + rho).powi(2) + s * s;
    let beta = beta2.sqrt();
    let m = 4.0 * a * rho / beta2;
    let kc2 = alpha2 / beta2;
    let (k, e) = ellip_ke(m);
    let dk_dm = (e - kc2 * k) / (2.0 * m * kc2);
    let de_dm = (e - k) / (2.0 * m);

    // partial derivatives with respect to (rho, s)
    let alpha2_d = [-2.0 * (a - rho), 2.0 * s];
    let beta2_d = [2.0 * (a + rho), 2.0 * s];
    let beta_d = [beta2_d[0] / (2.0 * beta), beta2_d[1] / (2.0 * beta)];
    let m_d = [
        4.0 * a / beta2 - m * beta2_d[0] / beta2,
        -m * beta2_d[1] / beta2,
    ];
    let k_d = [dk_dm * m_d[0], dk_dm * m_d[1]];
    let e_d = [de_dm * m_d[0], de_dm * m_d[1]];

    let u = a * a - rho * rho - s * s;
    let v = a * a + rho * rho + s * s;
    let u_d = [-2.0 * rho, -2.0 * s];
    let v_d = [2.0 * rho, 2.0 * s];

    let nz = u * e + alpha2 * k;
    let nr = v * e - alpha2 * k;
    let nz_d = [0, 1].map(|i| u_d[i] * e + u * e_d[i] + alpha2_d[i] * k + alpha2 * k_d[i]);
    let nr_d = [0, 1].map(|i| v_d[i] * e + v * e_d[i] - alpha2_d[i] * k - alpha2 * k_d[i]);

    let den = 2.0 * alpha2 * beta;
    let den_d = [0, 1].map(|i| 2.0 * (alpha2_d[i] * beta + alpha2 * beta_d[i]));

    let bz = c * nz / den;
    let bz_rho = c * (nz_d[0] * den - nz * den_d[0]) / (den * den);
    let bz_s = c * (nz_d[1] * den - nz * den_d[1]) / (den * den);

    // B_rho = c s nr / (den rho); p = B_rho / rho
    let p = c * s * nr / (den * rho * rho);
    let dr = den * rho;
    let dr_rho = den_d[0] * rho + den;
    let dr_s = den_d[1] * rho;
    let brho_rho = c * s * (nr_d[0] * dr - nr * dr_rho) / (dr * dr);
    let brho_s = c * ((nr + s * nr_d[1]) * dr - s * nr * dr_s) / (dr * dr);

    Axisymmetric {
        bz,
        p,
        q: (brho_rho - p) / (rho * rho),
        s_z: bz_rho / rho,
        s_r: brho_s / rho,
        t: bz_s,
    }
}

fn near_axis(a: f64, rho: f64, s: f64, r: f64, amp: f64) -> Axisymmetric {
    const ORDERS: usize = 2 * SERIES_TERMS;
    // Gegenbauer C_n^{(3/2)}(s/r): on-axis derivatives are
    // b^(n)(s) = b0 (-1)^n n! C_n(s/r) / r^(n+3) with b0 = μ₀ N I a² / 2.
    let x = s / r;
    let mut gegen = [0.0; ORDERS];
    gegen[0] = 1.0;
    gegen[1] = 3.0 * x;
    for n in 2..ORDERS {
        let nf = n as f64;
        gegen[n] = (2.0 * x * (nf + 0.5) * gegen[n - 1] - (nf + 1.0) * gegen[n - 2]) / nf;
    }
    let b0 = 0.5 * amp * a * a;
    let mut deriv = [0.0; ORDERS];
    let mut fact = 1.0;
    let mut rpow = r.powi(3);
    for n in 0..ORDERS {
        if n > 0 {
            fact *= n as f64;
            rpow *= r;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        deriv[n] = b0 * sign * fact * gegen[n] / rpow;
    }

    let w = 0.25 * rho * rho;
    let (mut bz, mut p, mut q, mut s_z, mut t) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut w_pow = 1.0; // w^n
    let mut w_prev = 0.0; // w^(n-1)
    let mut n_fact = 1.0;
    for n in 0..SERIES_TERMS {
        let nf = n as f64;
        if n > 0 {
            n_fact *= nf;
            w_prev = w_pow;
            w_pow *= w;
        }
        let n1_fact = n_fact * (nf + 1.0);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let even = deriv[2 * n];
        let odd = deriv[2 * n + 1];
        bz += sign * even * w_pow / (n_fact * n_fact);
        p -= sign * odd * w_pow / (2.0 * n_fact * n1_fact);
        t += sign * odd * w_pow / (n_fact * n_fact);
        if n > 0 {
            q -= sign * odd * nf * w_prev / (4.0 * n_fact * n1_fact);
            s_z += sign * even * nf * w_prev / (2.0 * n_fact * n_fact);
        }
    }
    Axisymmetric {
        bz,
        p,
        q,
        s_z,
        // curl-free by construction of the expansion
        s_r: s_z,
        t,
    }
}
