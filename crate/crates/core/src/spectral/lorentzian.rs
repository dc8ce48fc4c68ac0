//! Windowed Lorentzian peak fits.

use serde::Serialize;

use super::{SpectralError, Spectrum};
use crate::fit::{fit_curve, Model};

/// Smallest window accepted by [`fit_lorentzian`].
pub const MIN_WINDOW_BINS: usize = 8;
/// Robust peak significance required to accept a peak.
pub const SNR_THRESHOLD: f64 = 3.0;

/// Converged Lorentzian `A (w/2)² / ((f − f0)² + (w/2)²) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeFit {
    pub f0: f64,
    /// Full width at half maximum (Hz).
    pub width: f64,
    /// Peak height above the offset.
    pub amplitude: f64,
    pub offset: f64,
    /// RMS residual divided by the amplitude.
    pub residual: f64,
    pub window: (f64, f64),
}

pub fn lorentzian(f: f64, f0: f64, width: f64, amplitude: f64, offset: f64) -> f64 {
    let h = 0.5 * width;
    amplitude * h * h / ((f - f0).powi(2) + h * h) + offset
}

/// Lorentzian whose half width `h = √(h_min² + u²)` cannot drop below
/// `h_min`; without the floor an unresolved line drives `h → 0` while
/// `A h²` stays finite.
struct Lorentz {
    h_min: f64,
}

impl Model for Lorentz {
    fn n_params(&self) -> usize {
        4
    }

    // params: f0, u, amplitude, offset
    fn eval(&self, f: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let (f0, u, a) = (p[0], p[1], p[2]);
        let h = self.h_min.hypot(u);
        let d = f - f0;
        let den = d * d + h * h;
        let shape = h * h / den;
        g[0] = a * shape * 2.0 * d / den;
        g[1] = a * 2.0 * h * d * d / (den * den) * (u / h);
        g[2] = shape;
        g[3] = 1.0;
        a * shape + p[3]
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fits one Lorentzian to the bins inside `[f_lo, f_hi]`.
///
/// The peak must be an interior maximum whose robust significance
/// `(max − median) / (1.4826·MAD)` is at least [`SNR_THRESHOLD`]. The fitted
/// width is at least one bin: narrower lines are not resolved by the spectrum.
pub fn fit_lorentzian(spec: &Spectrum, window: (f64, f64)) -> Result<ModeFit, SpectralError> {
    let (f_lo, f_hi) = window;
    let no_peak = |reason: &str| SpectralError::NoPeak {
        f_lo,
        f_hi,
        reason: reason.to_string(),
    };
    if !(f_lo.is_finite() && f_hi.is_finite() && f_hi > f_lo) {
        return Err(SpectralError::InvalidParameter(format!(
            "window ({f_lo}, {f_hi}) is not an interval"
        )));
    }
    let lo = ((f_lo / spec.resolution).ceil().max(0.0)) as usize;
    let hi = ((f_hi / spec.resolution).floor() as usize).min(spec.len().saturating_sub(1));
    if hi < lo || hi - lo + 1 < MIN_WINDOW_BINS {
        return Err(SpectralError::InvalidParameter(format!(
            "window ({f_lo}, {f_hi}) holds fewer than {MIN_WINDOW_BINS} bins"
        )));
    }
    let f = &spec.frequencies[lo..=hi];
    let p = &spec.psd[lo..=hi];
    let (imax, &pmax) = p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("window is non-empty");
    if imax == 0 || imax == p.len() - 1 {
        return Err(no_peak("maximum at the window edge"));
    }
    let mut sorted = p.to_vec();
    let med = median(&mut sorted);
    let mut dev: Vec<f64> = p.iter().map(|v| (v - med).abs()).collect();
    let mad = 1.4826 * median(&mut dev);
    if pmax <= med || (mad > 0.0 && (pmax - med) / mad < SNR_THRESHOLD) {
        return Err(no_peak(&format!("peak significance below {SNR_THRESHOLD}")));
    }

    // half-maximum crossings around the peak, in bins
    let base = p.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let half = base + 0.5 * (pmax - base);
    let left = (0..imax).rev().find(|&i| p[i] < half).unwrap_or(0);
    let right = (imax + 1..p.len())
        .find(|&i| p[i] < half)
        .unwrap_or(p.len() - 1);
    let width0 = ((right - left) as f64 - 1.0).max(1.0) * spec.resolution;

    // work in units of the peak height so the tolerances are meaningful
    let y: Vec<f64> = p.iter().map(|v| v / pmax).collect();
    let h_min = 0.5 * spec.resolution;
    let h0 = 0.5 * width0;
    let u0 = (h0 * h0 - h_min * h_min).max(0.25 * h_min * h_min).sqrt();
    let p0 = [f[imax], u0, 1.0 - base / pmax, base / pmax];
    let fit = fit_curve(&Lorentz { h_min }, f, &y, &p0)?;
    let (f0, h, a, off) = (
        fit.params[0],
        h_min.hypot(fit.params[1]),
        fit.params[2],
        fit.params[3],
    );
    if !(f_lo..=f_hi).contains(&f0) {
        return Err(no_peak("fitted center left the window"));
    }
    if a <= 0.0 {
        return Err(no_peak("fit collapsed to a non-positive peak"));
    }
    let rms = (fit.rss / y.len() as f64).sqrt();
    Ok(ModeFit {
        f0,
        width: 2.0 * h,
        amplitude: a * pmax,
        offset: off * pmax,
        residual: rms / a,
        window,
    })
}
