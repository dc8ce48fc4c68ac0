use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Position, velocity, orientation (body-to-lab) and lab-frame angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub angular_velocity: Vector3<f64>,
}

impl Default for RigidState {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            angular_velocity: Vector3::zeros(),
        }
    }
}

impl RigidState {
    /// `(α, β, γ)` for `R = R_z(α) R_y(β) R_x(γ)`.
    pub fn angles(&self) -> (f64, f64, f64) {
        let (roll, pitch, yaw) = self.orientation.euler_angles();
        (yaw, pitch, roll)
    }

    /// Orientation from z-y-x angles.
    pub fn orientation_from_angles(alpha: f64, beta: f64, gamma: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_euler_angles(gamma, beta, alpha)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
    }

    /// Lab-frame moment for a body-fixed moment along body z.
    pub fn moment(&self, magnitude: f64) -> Vector3<f64> {
        self.orientation * Vector3::new(0.0, 0.0, magnitude)
    }
}
