//! Parameter sweeps: per-point simulation, mode tracking, scaling-law fits
//! and the canned figure plans.

mod figures;
mod output;
mod run;
mod scaling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Setup;
use crate::secular::ModePrediction;
use crate::spectral::{ScalingHint, SpectralError};

pub use figures::{
    figure_plan, lab_equivalent_current, offset_study, reproduce_figure, FigureId, FigureOptions,
    FigureReport, OffsetRow, OffsetStudy, LAB_CURVATURE, LAB_CURVATURE_CURRENT,
};
pub use output::{write_sweep_csv, write_sweep_outputs, FitsFile, SWEEP_HEADER};
pub use run::{run_sweep, ModeRecord, PointRecord, SweepResult};
pub use scaling::{fit_law, fit_scaling, ScalingFit, ScalingLaw};

/// Smallest accepted grid.
pub const MIN_GRID_POINTS: usize = 4;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep plan: {0}")]
    InvalidPlan(String),
    #[error("mode {mode}: need at least {needed} successful points in range, got {got}")]
    InsufficientPoints {
        mode: Mode,
        needed: usize,
        got: usize,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Swept quantity. Grid values are in the unit returned by [`SweepAxis::unit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Drive frequency Ω/(2π).
    OmegaDrive,
    ITrap,
    B0,
    B0Gradient,
    OffsetForceY,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::OmegaDrive => "omega_drive",
            SweepAxis::ITrap => "i_trap",
            SweepAxis::B0 => "b0",
            SweepAxis::B0Gradient => "b0_gradient",
            SweepAxis::OffsetForceY => "offset_force_y",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            SweepAxis::OmegaDrive => "Hz",
            SweepAxis::ITrap => "A",
            SweepAxis::B0 => "T",
            SweepAxis::B0Gradient => "T/m",
            SweepAxis::OffsetForceY => "N",
        }
    }

    /// Writes `value` into the matching field of `setup`.
    pub fn apply(&self, setup: &mut Setup, value: f64) {
        match self {
            SweepAxis::OmegaDrive => setup.drive.frequency_hz = value,
            SweepAxis::ITrap => setup.drive.i_trap_a = value,
            SweepAxis::B0 => setup.bias.b0_t = Some(value),
            SweepAxis::B0Gradient => setup.bias.b0_gradient_t_per_m = Some(value),
            SweepAxis::OffsetForceY => setup.simulation.offset_force_n[1] = value,
        }
    }

    /// Expected dependence of `mode` on this axis, used to move fit windows.
    pub fn hint(&self, mode: Mode) -> ScalingHint {
        match (self, mode.is_librational()) {
            (SweepAxis::OmegaDrive, false) => ScalingHint::Inverse,
            (SweepAxis::ITrap, false) => ScalingHint::Linear,
            (SweepAxis::B0, true) => ScalingHint::Sqrt,
            _ => ScalingHint::None,
        }
    }

    /// Law fitted by default for `mode`, if the model predicts one.
    pub fn default_law(&self, mode: Mode) -> Option<ScalingLaw> {
        match self.hint(mode) {
            ScalingHint::Inverse => Some(ScalingLaw::Inverse),
            ScalingHint::Linear => Some(ScalingLaw::Linear),
            ScalingHint::Sqrt => Some(ScalingLaw::Sqrt),
            ScalingHint::None => None,
        }
    }
}

/// Eigenmode; each is read from its own coordinate trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    X,
    Y,
    Z,
    Beta,
    Gamma,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::X, Mode::Y, Mode::Z, Mode::Beta, Mode::Gamma];
    pub const VIBRATIONAL: [Mode; 3] = [Mode::X, Mode::Y, Mode::Z];
    pub const LIBRATIONAL: [Mode; 2] = [Mode::Beta, Mode::Gamma];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::X => "x",
            Mode::Y => "y",
            Mode::Z => "z",
            Mode::Beta => "beta",
            Mode::Gamma => "gamma",
        }
    }

    /// Index of the coordinate trace: x, y, z, β, γ.
    pub fn channel(&self) -> usize {
        match self {
            Mode::X => 0,
            Mode::Y => 1,
            Mode::Z => 2,
            Mode::Beta => 3,
            Mode::Gamma => 4,
        }
    }

    pub fn is_librational(&self) -> bool {
        matches!(self, Mode::Beta | Mode::Gamma)
    }

    /// Closed-form angular frequency of this mode (rad/s).
    pub fn predicted(&self, p: &ModePrediction) -> f64 {
        match self {
            Mode::X => p.omega_x,
            Mode::Y => p.omega_y,
            Mode::Z => p.omega_z,
            Mode::Beta => p.omega_beta,
            Mode::Gamma => p.omega_gamma,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_modes() -> Vec<Mode> {
    Mode::VIBRATIONAL.to_vec()
}

/// The `[sweep]` section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
}

impl SweepSection {
    pub fn plan(&self, fixed: Setup) -> SweepPlan {
        SweepPlan {
            axis: self.axis,
            grid: self.grid.clone(),
            modes: self.modes.clone(),
            fixed,
        }
    }
}

/// One axis, its grid, the modes to follow and every other parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub modes: Vec<Mode>,
    pub fixed: Setup,
}

impl SweepPlan {
    pub fn section(&self) -> SweepSection {
        SweepSection {
            axis: self.axis,
            grid: self.grid.clone(),
            modes: self.modes.clone(),
        }
    }

    /// Setup of grid point `index`.
    pub fn point_setup(&self, index: usize) -> Setup {
        let mut setup = self.fixed.clone();
        self.axis.apply(&mut setup, self.grid[index]);
        setup
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::InvalidPlan(m));
        if self.grid.len() < MIN_GRID_POINTS {
            return bad(format!(
                "SweepPlan.grid needs at least {MIN_GRID_POINTS} points, got {}",
                self.grid.len()
            ));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return bad("SweepPlan.grid values must be finite".into());
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return bad("SweepPlan.grid must be strictly monotone".into());
        }
        if self.modes.is_empty() {
            return bad("SweepPlan.modes must not be empty".into());
        }
        let mut seen = self.modes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.modes.len() {
            return bad("SweepPlan.modes contains duplicates".into());
        }
        let uses_currents =
            self.fixed.bias.i_top_a.is_some() || self.fixed.bias.i_bottom_a.is_some();
        if uses_currents && matches!(self.axis, SweepAxis::B0 | SweepAxis::B0Gradient) {
            return bad(format!(
                "sweeping {} needs the bias given as field targets, not coil currents",
                self.axis.name()
            ));
        }
        for i in 0..self.grid.len() {
            if let Err(e) = self.point_setup(i).validate() {
                return bad(format!("grid point {} ({}): {e}", i, self.grid[i]));
            }
        }
        Ok(())
    }
}
