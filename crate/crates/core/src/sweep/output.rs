use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{fit_law, ScalingFit, SweepAxis, SweepError, SweepResult};
use crate::config::RunConfig;

pub const SWEEP_HEADER: &str = "param,mode,f0_hz,width_hz,status,q_z,escaped";

/// Contents of `fits.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitsFile {
    pub axis: SweepAxis,
    pub unit: &'static str,
    pub fits: Vec<ScalingFit>,
    /// Modes whose default law could not be fitted, with the reason.
    pub failed: Vec<(String, String)>,
}

impl FitsFile {
    /// Fits each mode's default law for the sweep axis over `range`.
    pub fn from_result(result: &SweepResult, range: Option<(f64, f64)>) -> Self {
        let plan = &result.plan;
        let range = range.unwrap_or((plan.grid[0], plan.grid[plan.grid.len() - 1]));
        let mut fits = Vec::new();
        let mut failed = Vec::new();
        for &mode in &plan.modes {
            let Some(law) = plan.axis.default_law(mode) else {
                continue;
            };
            match fit_law(mode, &result.successes(mode), law, range) {
                Ok(f) => fits.push(f),
                Err(e) => failed.push((mode.to_string(), e.to_string())),
            }
        }
        Self {
            axis: plan.axis,
            unit: plan.axis.unit(),
            fits,
            failed,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for p in &result.points {
        for m in &p.modes {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.param,
                m.mode,
                opt(m.fit.map(|f| f.f0)),
                opt(m.fit.map(|f| f.width)),
                m.status.as_str(),
                opt(p.q_z),
                p.escaped
            )?;
        }
    }
    Ok(())
}

/// Writes `sweep.csv`, `fits.json` and `config.resolved.json` into `dir`.
pub fn write_sweep_outputs(
    result: &SweepResult,
    fits: &impl Serialize,
    dir: &Path,
) -> Result<(), SweepError> {
    std::fs::create_dir_all(dir)?;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join("sweep.csv"))?);
    write_sweep_csv(result, &mut csv)?;
    csv.flush()?;
    std::fs::write(
        dir.join("fits.json"),
        serde_json::to_string_pretty(fits)? + "\n",
    )?;
    let plan = &result.plan;
    RunConfig::from_setup(&plan.fixed, Some(plan.section()), dir.to_path_buf())
        .write_resolved(dir)?;
    Ok(())
}
