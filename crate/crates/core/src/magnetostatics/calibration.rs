//! Current-to-field calibration curves for the bias coils and the trap.

use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::derivatives::{axial_derivatives, DEFAULT_STEP};
use super::trap::{bias_field, trap_field_amplitude, BiasParams, DriveParams, TrapGeometry};
use super::FieldError;

pub const CALIBRATION_HEADER: &str = "current_A,B0_T,B0p_T_per_m,B1pp_T_per_m2";

/// How the second coil and the trap are driven while one current is swept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSettings {
    /// `I_bottom = I_top − offset` for the field curve (A).
    pub bottom_offset_a: f64,
    /// Constant `I_bottom` for the gradient curve (A).
    pub bottom_fixed_a: f64,
    /// Current ratio for the curvature curve.
    pub xi: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            bottom_offset_a: 0.040,
            bottom_fixed_a: 0.100,
            xi: super::trap::DEFAULT_XI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub current: f64,
    /// `B_z(0)` with `I_bottom = I_top − offset` (T).
    pub b0: f64,
    /// `∂B_z/∂z(0)` with constant `I_bottom` (T/m).
    pub b0_gradient: f64,
    /// `|∂²B₁z/∂z²(0)|` with `I_trap = current` (T/m²).
    pub b1_curvature: f64,
}

/// Evaluates the three calibration curves on a strictly increasing current grid.
pub fn calibration_tables(
    geom: &TrapGeometry,
    currents: &[f64],
    settings: &CalibrationSettings,
) -> Result<Vec<CalibrationRow>, FieldError> {
    if currents.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FieldError::InvalidRequest(
            "calibration current grid must be strictly increasing".into(),
        ));
    }
    let origin = Vector3::zeros();
    currents
        .iter()
        .map(|&current| {
            let field_bias = BiasParams {
                i_top: current,
                i_bottom: current - settings.bottom_offset_a,
            };
            let b0 = bias_field(geom, &field_bias, &origin, false)?.b.z;
            let gradient_bias = BiasParams {
                i_top: current,
                i_bottom: settings.bottom_fixed_a,
            };
            let b0_gradient = bias_field(geom, &gradient_bias, &origin, true)?
                .jacobian
                .map(|j| j[(2, 2)])
                .unwrap_or_default();
            let b1_curvature = trap_curvature(geom, current, settings.xi, 0.0)?;
            Ok(CalibrationRow {
                current,
                b0,
                b0_gradient,
                b1_curvature,
            })
        })
        .collect()
}

/// `|B₁″|` of the trap amplitude at height `z0` for inner current `i_trap`.
pub fn trap_curvature(
    geom: &TrapGeometry,
    i_trap: f64,
    xi: f64,
    z0: f64,
) -> Result<f64, FieldError> {
    let drive = DriveParams {
        i_trap,
        xi,
        omega_drive: 1.0,
        phase: 0.0,
    };
    let d = axial_derivatives(
        |p: &Vector3<f64>| trap_field_amplitude(geom, &drive, p, false),
        z0,
        2,
        DEFAULT_STEP,
    )?;
    Ok(d[1].value.abs())
}

pub fn write_calibration_csv<W: Write>(rows: &[CalibrationRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CALIBRATION_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.current, r.b0, r.b0_gradient, r.b1_curvature
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_both_coil_currents_doubles_b0() {
        let g = TrapGeometry::default();
        let s = CalibrationSettings {
            bottom_offset_a: 0.0,
            ..Default::default()
        };
        let rows = calibration_tables(&g, &[0.05, 0.1], &s).unwrap();
        assert!((rows[1].b0 / rows[0].b0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn curvature_per_amp_is_constant() {
        let g = TrapGeometry::default();
        let grid: Vec<f64> = (1..=6).map(|k| 0.2 * k as f64).collect();
        let rows = calibration_tables(&g, &grid, &CalibrationSettings::default()).unwrap();
        let per_amp: Vec<f64> = rows.iter().map(|r| r.b1_curvature / r.current).collect();
        for w in per_amp.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 1e-9);
        }
        // curves increase monotonically with current
        assert!(rows.windows(2).all(|w| w[1].b0 > w[0].b0));
        assert!(rows.windows(2).all(|w| w[1].b0_gradient > w[0].b0_gradient));
    }

    #[test]
    fn grid_must_increase() {
        let g = TrapGeometry::default();
        assert!(calibration_tables(&g, &[0.2, 0.1], &CalibrationSettings::default()).is_err());
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_calibration_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), CALIBRATION_HEADER);
    }
}
