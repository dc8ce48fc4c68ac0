//! Exponential ringdown fits and quality factors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{power_spectrum, SpectralError};
use crate::fit::{fit_curve, linear_regression, Model};

/// A fitted decay time longer than this many trace lengths counts as no decay.
const MAX_TAU_OVER_LENGTH: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RingdownFit {
    pub tau: f64,
    pub f: f64,
    /// `π·f·τ`.
    pub q: f64,
    /// RMS residual divided by the initial amplitude.
    pub residual: f64,
}

impl RingdownFit {
    fn new(tau: f64, f: f64, residual: f64) -> Self {
        Self {
            tau,
            f,
            q: PI * f * tau,
            residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingdownOptions {
    /// Fit `A·exp(−t/τ) + c` to an envelope instead of the damped cosine.
    pub envelope_only: bool,
    /// Oscillation frequency; required in envelope mode, estimated otherwise.
    pub frequency_hz: Option<f64>,
}

/// `A e^{−λt} cos(2πft + φ) + c` with `λ = 1/τ`.
struct DampedCosine;

impl Model for DampedCosine {
    fn n_params(&self) -> usize {
        5
    }

    // params: A, λ, f, φ, c
    fn eval(&self, t: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let (a, lam, f, phi) = (p[0], p[1], p[2], p[3]);
        let env = (-lam * t).exp();
        let arg = 2.0 * PI * f * t + phi;
        let (s, c) = arg.sin_cos();
        g[0] = env * c;
        g[1] = -t * a * env * c;
        g[2] = -a * env * s * 2.0 * PI * t;
        g[3] = -a * env * s;
        g[4] = 1.0;
        a * env * c + p[4]
    }
}

/// `A e^{−λt} + c`.
struct Envelope;

impl Model for Envelope {
    fn n_params(&self) -> usize {
        3
    }

    fn eval(&self, t: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let env = (-p[1] * t).exp();
        g[0] = env;
        g[1] = -t * p[0] * env;
        g[2] = 1.0;
        p[0] * env + p[2]
    }
}

fn check_decay(lam: f64, length: f64) -> Result<f64, SpectralError> {
    let tau = 1.0 / lam;
    if !(lam > 0.0) || tau > MAX_TAU_OVER_LENGTH * length {
        return Err(SpectralError::NonDecaying {
            tau: if lam > 0.0 { tau } else { f64::INFINITY },
            length,
        });
    }
    Ok(tau)
}

/// Peak frequency of the trace by parabolic interpolation of the log periodogram.
fn dominant_frequency(trace: &[f64], sample_rate: f64) -> Result<f64, SpectralError> {
    let n = trace.len().min(1 << 16);
    let spec = power_spectrum(&trace[..n], sample_rate, n, 0.0)?;
    let k = (1..spec.len() - 1)
        .max_by(|&a, &b| spec.psd[a].total_cmp(&spec.psd[b]))
        .ok_or(SpectralError::TooShort { len: n, needed: 3 })?;
    let (l, c, r) = (
        spec.psd[k - 1].max(f64::MIN_POSITIVE).ln(),
        spec.psd[k].max(f64::MIN_POSITIVE).ln(),
        spec.psd[k + 1].max(f64::MIN_POSITIVE).ln(),
    );
    let den = l - 2.0 * c + r;
    let shift = if den != 0.0 { 0.5 * (l - r) / den } else { 0.0 };
    Ok((k as f64 + shift.clamp(-0.5, 0.5)) * spec.resolution)
}

/// Log-RMS regression over blocks of whole periods: returns `(A₀, λ)`.
fn envelope_guess(trace: &[f64], sample_rate: f64, f: f64) -> Result<(f64, f64), SpectralError> {
    let per_period = (sample_rate / f).max(1.0);
    let block = ((2.0 * per_period).round() as usize).max(4);
    let mean = trace.iter().sum::<f64>() / trace.len() as f64;
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for (i, chunk) in trace.chunks_exact(block).enumerate() {
        let rms = (chunk.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / block as f64).sqrt();
        if rms > 0.0 {
            t.push((i as f64 + 0.5) * block as f64 / sample_rate);
            y.push(rms.ln());
        }
    }
    let (a, b, _) = linear_regression(&t, &y)?;
    Ok((a.exp() * std::f64::consts::SQRT_2, -b))
}

/// Fits a ringdown and returns `τ`, `f` and `Q = π f τ`.
///
/// The default model is the full damped cosine, initialized from the
/// periodogram peak and a log-envelope regression. A fitted `τ` that is
/// negative or longer than 100 trace lengths is reported as non-decaying.
pub fn fit_ringdown(
    trace: &[f64],
    sample_rate: f64,
    options: &RingdownOptions,
) -> Result<RingdownFit, SpectralError> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "sample rate must be > 0, got {sample_rate}"
        )));
    }
    if trace.len() < 32 {
        return Err(SpectralError::TooShort {
            len: trace.len(),
            needed: 32,
        });
    }
    let length = trace.len() as f64 / sample_rate;
    let t: Vec<f64> = (0..trace.len()).map(|i| i as f64 / sample_rate).collect();

    if options.envelope_only {
        let f = options.frequency_hz.ok_or_else(|| {
            SpectralError::InvalidParameter("envelope fits need frequency_hz".into())
        })?;
        let scale = trace.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(SpectralError::NonDecaying {
                tau: f64::INFINITY,
                length,
            });
        }
        let y: Vec<f64> = trace.iter().map(|v| v / scale).collect();
        let last = y[y.len() - y.len() / 10..].iter().sum::<f64>() / (y.len() / 10) as f64;
        let lam0 = {
            let drop = ((y[0] - last) / (y[y.len() / 2] - last)).abs();
            if drop > 1.0 && drop.is_finite() {
                drop.ln() / t[y.len() / 2]
            } else {
                1.0 / length
            }
        };
        let fit = fit_curve(&Envelope, &t, &y, &[y[0] - last, lam0, last])?;
        let tau = check_decay(fit.params[1], length)?;
        let rms = (fit.rss / y.len() as f64).sqrt();
        return Ok(RingdownFit::new(tau, f, rms / fit.params[0].abs()));
    }

    let f0 = match options.frequency_hz {
        Some(f) => f,
        None => dominant_frequency(trace, sample_rate)?,
    };
    let cycles = f0 * length;
    if cycles < 10.0 {
        return Err(SpectralError::TooShort {
            len: trace.len(),
            needed: (10.0 * sample_rate / f0).ceil() as usize,
        });
    }
    let (a0, lam0) = envelope_guess(trace, sample_rate, f0)?;
    let scale = a0.max(f64::MIN_POSITIVE);
    let y: Vec<f64> = trace.iter().map(|v| v / scale).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;

    // phase from a linear fit of the first few cycles with f and λ fixed
    let head = ((4.0 * sample_rate / f0) as usize).clamp(8, y.len());
    let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..head {
        let env = (-lam0 * t[i]).exp();
        let (s, c) = (2.0 * PI * f0 * t[i]).sin_cos();
        let (c, s) = (env * c, env * s);
        cc += c * c;
        ss += s * s;
        cs += c * s;
        yc += (y[i] - mean) * c;
        ys += (y[i] - mean) * s;
    }
    let det = cc * ss - cs * cs;
    let (u, v) = if det != 0.0 {
        ((yc * ss - ys * cs) / det, (ys * cc - yc * cs) / det)
    } else {
        (1.0, 0.0)
    };
    // u cos − (−v) sin = R cos(θ + φ)
    let amp = u.hypot(v).max(1e-6);
    let phi = (-v).atan2(u);

    let fit = fit_curve(&DampedCosine, &t, &y, &[amp, lam0, f0, phi, mean])?;
    let tau = check_decay(fit.params[1], length)?;
    let rms = (fit.rss / y.len() as f64).sqrt();
    Ok(RingdownFit::new(
        tau,
        fit.params[2].abs(),
        rms / fit.params[0].abs(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ringdown(f: f64, tau: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                2e-6 * (-t / tau).exp() * (2.0 * PI * f * t + phase).cos() + 1e-8
            })
            .collect()
    }

    #[test]
    fn simple_ringdown_q() {
        let x = ringdown(100.0, 0.1, 5000.0, 2500, 0.4);
        let fit = fit_ringdown(&x, 5000.0, &RingdownOptions::default()).unwrap();
        assert!((fit.q / (PI * 10.0) - 1.0).abs() < 0.05);
        assert_eq!(fit.q, PI * fit.f * fit.tau);
    }

    #[test]
    fn high_q_librational_ringdown() {
        let tau = 2500.0 / (PI * 1372.4);
        assert!((tau - 0.580).abs() < 1e-3);
        let x = ringdown(1372.4, tau, 10_000.0, 20_000, -1.1);
        let fit = fit_ringdown(&x, 10_000.0, &RingdownOptions::default()).unwrap();
        assert!((fit.q / 2500.0 - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.f - 1372.4).abs() < 0.01);
    }

    #[test]
    fn constant_amplitude_is_not_a_ringdown() {
        let x: Vec<f64> = (0..5000)
            .map(|i| (2.0 * PI * 50.0 * i as f64 / 2000.0).sin())
            .collect();
        assert!(matches!(
            fit_ringdown(&x, 2000.0, &RingdownOptions::default()),
            Err(SpectralError::NonDecaying { .. })
        ));
    }

    #[test]
    fn envelope_mode() {
        let tau = 0.3;
        let env: Vec<f64> = (0..3000)
            .map(|i| 5.0 * (-(i as f64 / 1000.0) / tau).exp() + 0.1)
            .collect();
        let opts = RingdownOptions {
            envelope_only: true,
            frequency_hz: Some(200.0),
        };
        let fit = fit_ringdown(&env, 1000.0, &opts).unwrap();
        assert!((fit.tau / tau - 1.0).abs() < 1e-6);
        assert!((fit.q - PI * 200.0 * fit.tau).abs() < 1e-12);
        let no_f = RingdownOptions {
            envelope_only: true,
            frequency_hz: None,
        };
        assert!(fit_ringdown(&env, 1000.0, &no_f).is_err());
    }

    #[test]
    fn too_few_cycles() {
        let x = ringdown(2.0, 1.0, 100.0, 200, 0.0);
        assert!(matches!(
            fit_ringdown(&x, 100.0, &RingdownOptions::default()),
            Err(SpectralError::TooShort { .. })
        ));
    }
}
