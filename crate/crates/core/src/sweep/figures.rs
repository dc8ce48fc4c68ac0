//! Canned sweep plans for the eigenmode-scaling figures and the offset-force study.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    fit_law, run_sweep, write_sweep_outputs, FitsFile, Mode, ScalingFit, ScalingLaw, SweepAxis,
    SweepError, SweepPlan, SweepResult,
};
use crate::config::{RunConfig, Setup};
use crate::dynamics::ForceModel;
use crate::magnetostatics::{trap_curvature, FieldError, TrapGeometry};

/// Curvature implied by the measured z-mode at the reference lab current (T/m²).
pub const LAB_CURVATURE: f64 = 1335.0;
/// Lab trap current at which [`LAB_CURVATURE`] was inferred (A).
pub const LAB_CURVATURE_CURRENT: f64 = 1.07;

/// Lab trap current held fixed in the Fig. 2 style sweeps (A).
const LAB_FIXED_CURRENT: f64 = 0.97;
const FIXED_DRIVE_HZ: f64 = 150.0;
const FINITE_VOLUME_ORDER: usize = 2;

/// Model trap current with the same trap curvature at the center that a lab
/// current of `lab_current` had in the experiment.
///
/// The filament model gives a larger curvature per ampere than the lab trap,
/// so the figure plans are specified in lab currents and converted here.
pub fn lab_equivalent_current(
    geom: &TrapGeometry,
    xi: f64,
    lab_current: f64,
) -> Result<f64, FieldError> {
    let per_amp = trap_curvature(geom, 1.0, xi, 0.0)?;
    Ok(lab_current * (LAB_CURVATURE / LAB_CURVATURE_CURRENT) / per_amp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FigureId {
    #[serde(rename = "fig2a")]
    Fig2a,
    #[serde(rename = "fig2b")]
    Fig2b,
    #[serde(rename = "fig2c")]
    Fig2c,
    #[serde(rename = "fig2d")]
    Fig2d,
    #[serde(rename = "figS4a")]
    FigS4a,
    #[serde(rename = "figS4b")]
    FigS4b,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [
        FigureId::Fig2a,
        FigureId::Fig2b,
        FigureId::Fig2c,
        FigureId::Fig2d,
        FigureId::FigS4a,
        FigureId::FigS4b,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FigureId::Fig2a => "fig2a",
            FigureId::Fig2b => "fig2b",
            FigureId::Fig2c => "fig2c",
            FigureId::Fig2d => "fig2d",
            FigureId::FigS4a => "figS4a",
            FigureId::FigS4b => "figS4b",
        }
    }
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<_> = FigureId::ALL.iter().map(|f| f.name()).collect();
                format!("unknown figure {s:?} (known: {})", known.join(", "))
            })
    }
}

impl std::fmt::Display for FigureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureOptions {
    pub workers: usize,
    pub seed: u64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            seed: 0,
        }
    }
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

fn base_setup(seed: u64) -> Setup {
    let mut s = Setup {
        seed,
        ..Setup::default()
    };
    s.drive.frequency_hz = FIXED_DRIVE_HZ;
    s.drive.i_trap_a = lab_equivalent_current(&s.geometry, s.drive.xi, LAB_FIXED_CURRENT)
        .expect("default geometry is valid");
    s
}

/// The Ω grid of the supplementary simulations and the offsets of the study.
fn supplementary_grid() -> Vec<f64> {
    steps(125.0, 225.0, 25.0)
}

/// Offset forces of the study (N).
pub fn offset_grid() -> Vec<f64> {
    vec![0.0, 1e-8, 2e-8, 3e-8, 4e-8]
}

/// The single plan behind a figure; the supplementary figures return their
/// point-dipole Ω sweep.
pub fn figure_plan(id: FigureId, seed: u64) -> SweepPlan {
    let fixed = base_setup(seed);
    let lab = |amps: f64| {
        lab_equivalent_current(&fixed.geometry, fixed.drive.xi, amps).expect("valid geometry")
    };
    let (axis, grid, modes) = match id {
        FigureId::Fig2a => (
            SweepAxis::B0Gradient,
            steps(46e-3, 86e-3, 5e-3),
            Mode::VIBRATIONAL.to_vec(),
        ),
        FigureId::Fig2b => (
            SweepAxis::OmegaDrive,
            steps(100.0, 250.0, 10.0),
            Mode::VIBRATIONAL.to_vec(),
        ),
        FigureId::Fig2c => (
            SweepAxis::ITrap,
            steps(0.64, 1.13, 0.07).into_iter().map(lab).collect(),
            Mode::VIBRATIONAL.to_vec(),
        ),
        FigureId::Fig2d => (
            SweepAxis::B0,
            steps(2e-3, 10e-3, 1e-3),
            Mode::LIBRATIONAL.to_vec(),
        ),
        FigureId::FigS4a | FigureId::FigS4b => (
            SweepAxis::OmegaDrive,
            supplementary_grid(),
            Mode::VIBRATIONAL.to_vec(),
        ),
    };
    let mut plan = SweepPlan {
        axis,
        grid,
        modes,
        fixed,
    };
    if matches!(id, FigureId::FigS4a | FigureId::FigS4b) {
        plan.fixed.simulation.small_angle_mode = true;
    }
    plan
}

/// Ω range over which the inverse law is fitted in the Ω figures (Hz).
const INVERSE_RANGE: (f64, f64) = (100.0, 200.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub mode: Mode,
    /// Parameter of the first interior turning point of the fitted frequencies.
    pub param: Option<f64>,
    pub kind: Option<&'static str>,
}

fn interior_extremum(mode: Mode, samples: &[(f64, f64)]) -> Extremum {
    for w in samples.windows(3) {
        let (a, b) = (w[1].1 - w[0].1, w[2].1 - w[1].1);
        if a * b < 0.0 {
            return Extremum {
                mode,
                param: Some(w[1].0),
                kind: Some(if a > 0.0 { "max" } else { "min" }),
            };
        }
    }
    Extremum {
        mode,
        param: None,
        kind: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub param: f64,
    pub mode: Mode,
    pub point_dipole_hz: f64,
    pub finite_volume_hz: f64,
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetRow {
    pub offset_force_y_n: f64,
    pub param: f64,
    pub f_x_hz: Option<f64>,
    pub f_y_hz: Option<f64>,
    pub splitting_hz: Option<f64>,
    pub resolution_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetSlope {
    pub offset_force_y_n: f64,
    pub mode: Mode,
    pub fit: Option<ScalingFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetStudy {
    pub offsets: Vec<f64>,
    pub rows: Vec<OffsetRow>,
    pub slopes: Vec<OffsetSlope>,
}

impl OffsetStudy {
    /// Inverse-law coefficient of `mode` per offset, `None` where the fit failed.
    pub fn slopes_of(&self, mode: Mode) -> Vec<(f64, Option<f64>)> {
        self.slopes
            .iter()
            .filter(|s| s.mode == mode)
            .map(|s| (s.offset_force_y_n, s.fit.map(|f| f.coefficient)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "offset_force_y_n,param,f_x_hz,f_y_hz,splitting_hz,resolution_hz"
        )?;
        let o = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.offset_force_y_n,
                r.param,
                o(r.f_x_hz),
                o(r.f_y_hz),
                o(r.splitting_hz),
                o(r.resolution_hz)
            )?;
        }
        Ok(())
    }
}

/// Runs the Ω sweep of `plan` once per offset force in `delta_fy`.
///
/// Reports the x/y splitting at every Ω and the inverse-law coefficient
/// (the slope of f against Ω⁻¹) of every mode per offset.
pub fn offset_study(
    delta_fy: &[f64],
    plan: &SweepPlan,
    workers: usize,
) -> Result<(OffsetStudy, Vec<SweepResult>), SweepError> {
    if plan.axis != SweepAxis::OmegaDrive {
        return Err(SweepError::InvalidPlan(
            "the offset study sweeps omega_drive".into(),
        ));
    }
    if !delta_fy.contains(&0.0) {
        return Err(SweepError::InvalidPlan(
            "the offset grid must contain 0".into(),
        ));
    }
    if !(plan.modes.contains(&Mode::X) && plan.modes.contains(&Mode::Y)) {
        return Err(SweepError::InvalidPlan(
            "the offset study needs the x and y modes".into(),
        ));
    }
    let mut study = OffsetStudy {
        offsets: delta_fy.to_vec(),
        rows: Vec::new(),
        slopes: Vec::new(),
    };
    let mut results = Vec::with_capacity(delta_fy.len());
    for &df in delta_fy {
        let mut sub = plan.clone();
        sub.fixed.simulation.offset_force_n[1] = df;
        let result = run_sweep(&sub, workers)?;
        for p in &result.points {
            let (fx, fy) = (p.f0(Mode::X), p.f0(Mode::Y));
            study.rows.push(OffsetRow {
                offset_force_y_n: df,
                param: p.param,
                f_x_hz: fx,
                f_y_hz: fy,
                splitting_hz: fx.zip(fy).map(|(x, y)| (y - x).abs()),
                resolution_hz: p.resolution_hz,
            });
        }
        for &mode in &plan.modes {
            let range = (plan.grid[0], plan.grid[plan.grid.len() - 1]);
            let fit = fit_law(mode, &result.successes(mode), ScalingLaw::Inverse, range);
            study.slopes.push(OffsetSlope {
                offset_force_y_n: df,
                mode,
                error: fit.as_ref().err().map(|e| e.to_string()),
                fit: fit.ok(),
            });
        }
        results.push(result);
    }
    Ok((study, results))
}

/// Summary written to a figure's top-level `fits.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureReport {
    pub figure: FigureId,
    /// Model trap current per ampere of lab current.
    pub lab_current_scale: f64,
    pub fits: Option<FitsFile>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extrema: Vec<Extremum>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub comparison: Vec<ComparisonRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_relative_difference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset_study: Option<OffsetStudy>,
    /// The underlying sweeps (point dipole first for figS4a, one per offset for figS4b).
    #[serde(skip)]
    pub sweeps: Vec<SweepResult>,
}

fn write_report(report: &FigureReport, out: &Path) -> Result<(), SweepError> {
    std::fs::write(
        out.join("fits.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    Ok(())
}

/// Runs the plan(s) of `id` and writes the plot-ready datasets under `out`.
///
/// Single-sweep figures write `sweep.csv`, `fits.json` and
/// `config.resolved.json` directly into `out`. `figS4a` writes one
/// sub-directory per force model plus `comparison.csv`; `figS4b` writes one
/// sub-directory per offset force plus `offset_study.csv`.
pub fn reproduce_figure(
    id: FigureId,
    out: &Path,
    opts: &FigureOptions,
) -> Result<FigureReport, SweepError> {
    std::fs::create_dir_all(out)?;
    let plan = figure_plan(id, opts.seed);
    let scale = lab_equivalent_current(&plan.fixed.geometry, plan.fixed.drive.xi, 1.0)
        .map_err(|e| SweepError::InvalidPlan(e.to_string()))?;
    let mut report = FigureReport {
        figure: id,
        lab_current_scale: scale,
        fits: None,
        extrema: Vec::new(),
        comparison: Vec::new(),
        max_relative_difference: None,
        offset_study: None,
        sweeps: Vec::new(),
    };
    match id {
        FigureId::FigS4a => {
            let point = run_sweep(&plan, opts.workers)?;
            let mut fv_plan = plan.clone();
            fv_plan.fixed.simulation.force_model = ForceModel::FiniteVolume {
                order: FINITE_VOLUME_ORDER,
            };
            let volume = run_sweep(&fv_plan, opts.workers)?;
            for (label, r) in [("point_dipole", &point), ("finite_volume", &volume)] {
                write_sweep_outputs(r, &FitsFile::from_result(r, None), &out.join(label))?;
            }
            for (p, v) in point.points.iter().zip(&volume.points) {
                for &mode in &plan.modes {
                    if let (Some(a), Some(b)) = (p.f0(mode), v.f0(mode)) {
                        report.comparison.push(ComparisonRow {
                            param: p.param,
                            mode,
                            point_dipole_hz: a,
                            finite_volume_hz: b,
                            relative_difference: (b - a) / a,
                        });
                    }
                }
            }
            report.max_relative_difference = report
                .comparison
                .iter()
                .map(|c| c.relative_difference.abs())
                .reduce(f64::max);
            let mut csv = std::fs::File::create(out.join("comparison.csv"))?;
            writeln!(
                csv,
                "param,mode,point_dipole_hz,finite_volume_hz,relative_difference"
            )?;
            for c in &report.comparison {
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    c.param, c.mode, c.point_dipole_hz, c.finite_volume_hz, c.relative_difference
                )?;
            }
            report.fits = Some(FitsFile::from_result(&point, None));
            report.sweeps = vec![point, volume];
        }
        FigureId::FigS4b => {
            let offsets = offset_grid();
            let (study, results) = offset_study(&offsets, &plan, opts.workers)?;
            for (k, r) in results.iter().enumerate() {
                let dir = out.join(format!("offset_{k}"));
                write_sweep_outputs(r, &FitsFile::from_result(r, None), &dir)?;
            }
            let mut csv = std::fs::File::create(out.join("offset_study.csv"))?;
            study.write_csv(&mut csv)?;
            report.offset_study = Some(study);
            report.sweeps = results;
        }
        _ => {
            let result = run_sweep(&plan, opts.workers)?;
            let range = match id {
                FigureId::Fig2b => Some(INVERSE_RANGE),
                _ => None,
            };
            let fits = FitsFile::from_result(&result, range);
            if id == FigureId::Fig2a {
                report.extrema = plan
                    .modes
                    .iter()
                    .map(|&m| interior_extremum(m, &result.successes(m)))
                    .collect();
            }
            write_sweep_outputs(&result, &fits, out)?;
            report.fits = Some(fits);
            report.sweeps = vec![result];
        }
    }
    if matches!(id, FigureId::FigS4a | FigureId::FigS4b) {
        // single-sweep figures already wrote theirs alongside sweep.csv
        RunConfig::from_setup(&plan.fixed, Some(plan.section()), out.to_path_buf())
            .write_resolved(out)?;
    }
    write_report(&report, out)?;
    Ok(report)
}
