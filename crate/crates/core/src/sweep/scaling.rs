use serde::{Deserialize, Serialize};

use super::{Mode, SweepError, SweepResult, MIN_GRID_POINTS};
use crate::fit::{linear_regression, r_squared};

/// One-parameter scaling law `f = c·g(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingLaw {
    /// `f = c/p`
    Inverse,
    /// `f = c·p`
    Linear,
    /// `f = c·√p`
    Sqrt,
}

impl ScalingLaw {
    pub fn basis(&self, p: f64) -> f64 {
        match self {
            ScalingLaw::Inverse => 1.0 / p,
            ScalingLaw::Linear => p,
            ScalingLaw::Sqrt => p.sqrt(),
        }
    }

    /// Exponent of the law viewed as a power law.
    pub fn exponent(&self) -> f64 {
        match self {
            ScalingLaw::Inverse => -1.0,
            ScalingLaw::Linear => 1.0,
            ScalingLaw::Sqrt => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub mode: Mode,
    pub law: ScalingLaw,
    pub coefficient: f64,
    pub range: (f64, f64),
    pub r_squared: f64,
    /// Free-exponent diagnostic `f = a·p^e` from a log-log regression.
    pub exponent: f64,
    pub exponent_prefactor: f64,
    pub exponent_r_squared: f64,
    pub points: usize,
}

/// Fits `law` (and the free power law) to `(p, f)` samples inside `range`.
pub fn fit_law(
    mode: Mode,
    samples: &[(f64, f64)],
    law: ScalingLaw,
    range: (f64, f64),
) -> Result<ScalingFit, SweepError> {
    let (lo, hi) = (range.0.min(range.1), range.0.max(range.1));
    let used: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(p, f)| (lo..=hi).contains(p) && p.is_finite() && f.is_finite() && *f > 0.0)
        .collect();
    if used.len() < MIN_GRID_POINTS || used.iter().any(|(p, _)| *p <= 0.0) {
        return Err(SweepError::InsufficientPoints {
            mode,
            needed: MIN_GRID_POINTS,
            got: used.iter().filter(|(p, _)| *p > 0.0).count(),
        });
    }
    let f: Vec<f64> = used.iter().map(|s| s.1).collect();
    let g: Vec<f64> = used.iter().map(|s| law.basis(s.0)).collect();
    let coefficient =
        f.iter().zip(&g).map(|(f, g)| f * g).sum::<f64>() / g.iter().map(|g| g * g).sum::<f64>();
    let pred: Vec<f64> = g.iter().map(|g| coefficient * g).collect();

    let lp: Vec<f64> = used.iter().map(|s| s.0.ln()).collect();
    let lf: Vec<f64> = f.iter().map(|f| f.ln()).collect();
    let (a, e, r2_log) =
        linear_regression(&lp, &lf).map_err(|_| SweepError::InsufficientPoints {
            mode,
            needed: MIN_GRID_POINTS,
            got: used.len(),
        })?;
    Ok(ScalingFit {
        mode,
        law,
        coefficient,
        range: (lo, hi),
        r_squared: r_squared(&f, &pred),
        exponent: e,
        exponent_prefactor: a.exp(),
        exponent_r_squared: r2_log,
        points: used.len(),
    })
}

/// Fits `law` to every mode of the sweep over `range` (the whole grid when `None`).
pub fn fit_scaling(
    result: &SweepResult,
    law: ScalingLaw,
    range: Option<(f64, f64)>,
) -> Result<Vec<ScalingFit>, SweepError> {
    let grid = &result.plan.grid;
    let range = range.unwrap_or((grid[0], grid[grid.len() - 1]));
    result
        .plan
        .modes
        .iter()
        .map(|&mode| fit_law(mode, &result.successes(mode), law, range))
        .collect()
}
