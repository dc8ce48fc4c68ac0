//! Dipole force and torque, Gauss–Legendre rules and the volume-averaged force.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::magnetostatics::FieldError;
use crate::secular::MagnetSpec;
use crate::{MU_0, STANDARD_GRAVITY};

use super::FieldSource;

/// `F = ∇(μ·B) = Jᵀμ` with `J[i][j] = ∂B_i/∂x_j`.
pub fn dipole_force(moment: &Vector3<f64>, jacobian: &Matrix3<f64>) -> Vector3<f64> {
    jacobian.transpose() * moment
}

/// `Γ = μ × B`.
pub fn dipole_torque(moment: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    moment.cross(b)
}

/// Bias gradient at which the static lift `μB₀′` balances gravity: `μ₀ρg/B_sat`.
pub fn equilibrium_gradient(spec: &MagnetSpec) -> f64 {
    MU_0 * spec.density * STANDARD_GRAVITY / spec.b_sat
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Tensor-product quadrature over the oriented cube.
#[derive(Debug, Clone)]
pub struct CubeQuadrature {
    /// Body-frame offsets from the cube center (m).
    offsets: Vec<Vector3<f64>>,
    /// Weights normalized to sum to one.
    weights: Vec<f64>,
}

impl CubeQuadrature {
    pub fn new(edge: f64, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let half = 0.5 * edge;
        let mut offsets = Vec::with_capacity(order.pow(3));
        let mut weights = Vec::with_capacity(order.pow(3));
        for i in 0..order {
            for j in 0..order {
                for k in 0..order {
                    offsets.push(Vector3::new(x[i], x[j], x[k]) * half);
                    weights.push(w[i] * w[j] * w[k] / 8.0);
                }
            }
        }
        Self { offsets, weights }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Volume-averaged force and torque on the cube, plus the field at its center.
#[derive(Debug, Clone, Copy)]
pub struct BodyLoad {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

/// Force and torque on a point dipole at `center`.
pub fn point_dipole_load<S: FieldSource + ?Sized>(
    source: &S,
    center: &Vector3<f64>,
    moment: &Vector3<f64>,
    t: f64,
) -> Result<BodyLoad, FieldError> {
    let f = source.field(center, t, true)?;
    let jac = f.jacobian.expect("jacobian requested");
    Ok(BodyLoad {
        force: dipole_force(moment, &jac),
        torque: dipole_torque(moment, &f.b),
    })
}

/// Uniformly magnetized cube: the dipole force density `∇(M·B)` and torque
/// density `M×B + r′×∇(M·B)` averaged over the rotated cube.
pub fn volume_averaged_load<S: FieldSource + ?Sized>(
    source: &S,
    quad: &CubeQuadrature,
    center: &Vector3<f64>,
    orientation: &UnitQuaternion<f64>,
    moment: &Vector3<f64>,
    t: f64,
) -> Result<BodyLoad, FieldError> {
    let mut force = Vector3::zeros();
    let mut torque = Vector3::zeros();
    for (offset, &w) in quad.offsets.iter().zip(&quad.weights) {
        let arm = orientation * offset;
        let f = source.field(&(center + arm), t, true)?;
        let local = dipole_force(moment, &f.jacobian.expect("jacobian requested"));
        force += w * local;
        torque += w * (dipole_torque(moment, &f.b) + arm.cross(&local));
    }
    Ok(BodyLoad { force, torque })
}

/// Force-only convenience wrapper around [`volume_averaged_load`].
pub fn volume_averaged_force<S: FieldSource + ?Sized>(
    source: &S,
    spec: &MagnetSpec,
    order: usize,
    center: &Vector3<f64>,
    orientation: &UnitQuaternion<f64>,
    t: f64,
) -> Result<Vector3<f64>, FieldError> {
    let quad = CubeQuadrature::new(spec.edge, order);
    let moment = orientation * Vector3::new(0.0, 0.0, spec.moment());
    Ok(volume_averaged_load(source, &quad, center, orientation, &moment, t)?.force)
}
