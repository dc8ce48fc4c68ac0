//! Closed-form secular (Mathieu-regime) predictions for the levitated cube.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

use crate::MU_0;

/// Below this `q_z` the pseudopotential picture is trusted.
pub const Q_STABLE: f64 = 0.4;
/// First Mathieu stability boundary for `a = 0`.
pub const Q_MATHIEU_BOUNDARY: f64 = 0.908;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid magnet: {0}")]
pub struct MagnetError(pub String);

/// Hard ferromagnetic cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagnetSpec {
    /// Cube edge length (m).
    #[serde(rename = "edge_m")]
    pub edge: f64,
    /// Mass density (kg/m³).
    #[serde(rename = "density_kg_per_m3")]
    pub density: f64,
    /// Magnetization field `B_sat = μ₀M` (T).
    #[serde(rename = "b_sat_t")]
    pub b_sat: f64,
}

impl Default for MagnetSpec {
    fn default() -> Self {
        Self {
            edge: 250e-6,
            density: 7.5e3,
            b_sat: 1.4,
        }
    }
}

impl MagnetSpec {
    pub fn validate(&self) -> Result<(), MagnetError> {
        for (name, v) in [
            ("edge", self.edge),
            ("density", self.density),
            ("b_sat", self.b_sat),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(MagnetError(format!(
                    "MagnetSpec.{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.edge.powi(3)
    }

    pub fn mass(&self) -> f64 {
        self.density * self.volume()
    }

    /// Dipole moment magnitude `(B_sat/μ₀)·a³` (A·m²).
    pub fn moment(&self) -> f64 {
        self.b_sat / MU_0 * self.volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagnetProperties {
    pub mass: f64,
    pub moment: f64,
    pub volume: f64,
}

pub fn magnet_properties(spec: &MagnetSpec) -> MagnetProperties {
    MagnetProperties {
        mass: spec.mass(),
        moment: spec.moment(),
        volume: spec.volume(),
    }
}

/// Drive and bias parameters entering the closed-form predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Ω (rad/s).
    pub omega_drive: f64,
    /// |B₁″| (T/m²).
    pub b1_curvature: f64,
    /// B₀ (T).
    pub b0: f64,
    /// B₀′ (T/m).
    pub b0_gradient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModePrediction {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    pub omega_beta: f64,
    pub omega_gamma: f64,
    pub q_z: f64,
}

/// `(q_z, q_xy)` with `q_z = 2|B₁″|B_sat/(μ₀ρΩ²)` and `q_xy = −q_z/2`.
pub fn mathieu_q(op: &OperatingPoint, spec: &MagnetSpec) -> (f64, f64) {
    let q_z = 2.0 * op.b1_curvature.abs() * spec.b_sat
        / (MU_0 * spec.density * op.omega_drive * op.omega_drive);
    (q_z, -0.5 * q_z)
}

/// Vibrational part of the prediction; librational fields are zero.
pub fn secular_frequencies(op: &OperatingPoint, spec: &MagnetSpec) -> ModePrediction {
    let (q_z, _) = mathieu_q(op, spec);
    let omega_z = 0.5 * op.omega_drive * q_z / SQRT_2;
    ModePrediction {
        omega_x: 0.5 * omega_z,
        omega_y: 0.5 * omega_z,
        omega_z,
        omega_beta: 0.0,
        omega_gamma: 0.0,
        q_z,
    }
}

/// `ω_z` written directly in the curvature, `|B₁″|B_sat/(μ₀ρΩ√2)`.
pub fn omega_z_from_curvature(op: &OperatingPoint, spec: &MagnetSpec) -> f64 {
    op.b1_curvature.abs() * spec.b_sat / (MU_0 * spec.density * op.omega_drive * SQRT_2)
}

/// `ω_β = ω_γ = √(5/2 · B₀B_sat/(μ₀ρa²))`, with `a` the cube edge.
pub fn librational_frequencies(b0: f64, spec: &MagnetSpec) -> (f64, f64) {
    let w = (2.5 * b0.max(0.0) * spec.b_sat / (MU_0 * spec.density * spec.edge * spec.edge)).sqrt();
    (w, w)
}

/// Full prediction: vibrational modes from the curvature, librational from B₀.
pub fn predict(op: &OperatingPoint, spec: &MagnetSpec) -> ModePrediction {
    let (omega_beta, omega_gamma) = librational_frequencies(op.b0, spec);
    ModePrediction {
        omega_beta,
        omega_gamma,
        ..secular_frequencies(op, spec)
    }
}

/// Inverse of the vibrational z-mode relation: `|B₁″| = ω_z μ₀ρΩ√2/B_sat`.
pub fn curvature_from_omega_z(omega_z: f64, omega_drive: f64, spec: &MagnetSpec) -> f64 {
    omega_z * MU_0 * spec.density * omega_drive * SQRT_2 / spec.b_sat
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Marginal => "marginal",
            Stability::Unstable => "unstable",
        }
    }
}

pub fn stability_check(q_z: f64) -> Stability {
    if q_z < Q_STABLE {
        Stability::Stable
    } else if q_z < Q_MATHIEU_BOUNDARY {
        Stability::Marginal
    } else {
        Stability::Unstable
    }
}

/// Hz from rad/s.
pub fn hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// JSON-facing summary in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub q_z: f64,
    pub omega_x_hz: f64,
    pub omega_y_hz: f64,
    pub omega_z_hz: f64,
    pub omega_beta_hz: f64,
    pub omega_gamma_hz: f64,
    pub stability: Stability,
}

impl From<&ModePrediction> for PredictionRecord {
    fn from(p: &ModePrediction) -> Self {
        Self {
            q_z: p.q_z,
            omega_x_hz: hz(p.omega_x),
            omega_y_hz: hz(p.omega_y),
            omega_z_hz: hz(p.omega_z),
            omega_beta_hz: hz(p.omega_beta),
            omega_gamma_hz: hz(p.omega_gamma),
            stability: stability_check(p.q_z),
        }
    }
}
