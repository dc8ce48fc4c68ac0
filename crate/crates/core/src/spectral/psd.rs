//! Welch power spectral density.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::SpectralError;

pub const SPECTRUM_HEADER: &str = "f_hz,psd";

/// Smallest accepted segment.
const MIN_SEGMENT: usize = 16;

/// One-sided PSD on a uniform grid starting at 0 Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub psd: Vec<f64>,
    pub resolution: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }

    /// Bin index nearest to `f`, clamped to the grid.
    pub fn bin_of(&self, f: f64) -> usize {
        ((f / self.resolution).round().max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    /// `Σ psd·Δf`.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SPECTRUM_HEADER}")?;
        for (f, p) in self.frequencies.iter().zip(&self.psd) {
            writeln!(out, "{f},{p}")?;
        }
        Ok(())
    }
}

/// Averaged periodogram with a periodic Hann taper.
///
/// Each segment has its mean removed before tapering. The one-sided scaling
/// `2/(fs Σw²)` (no doubling at DC or Nyquist) makes `Σ psd·Δf` the average
/// taper-weighted mean square, which equals the variance for stationary
/// input. A sinusoid exactly on bin `k` occupies bins `k−1..=k+1` (the Hann
/// main lobe) and nothing else.
pub fn power_spectrum(
    trace: &[f64],
    sample_rate: f64,
    segment_length: usize,
    overlap_fraction: f64,
) -> Result<Spectrum, SpectralError> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "sample rate must be > 0, got {sample_rate}"
        )));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(SpectralError::InvalidParameter(format!(
            "overlap fraction must be in [0, 1), got {overlap_fraction}"
        )));
    }
    if segment_length < MIN_SEGMENT {
        return Err(SpectralError::InvalidParameter(format!(
            "segment length must be >= {MIN_SEGMENT}, got {segment_length}"
        )));
    }
    if trace.len() < segment_length {
        return Err(SpectralError::TooShort {
            len: trace.len(),
            needed: segment_length,
        });
    }
    let n = segment_length;
    let hop = (((1.0 - overlap_fraction) * n as f64).round() as usize).max(1);
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut segments = 0usize;
    let mut start = 0;
    while start + n <= trace.len() {
        let seg = &trace[start..start + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 2.0 / (sample_rate * w2 * segments as f64);
    let mut psd: Vec<f64> = acc.into_iter().map(|a| a * scale).collect();
    psd[0] *= 0.5;
    if n % 2 == 0 {
        psd[bins - 1] *= 0.5;
    }
    let resolution = sample_rate / n as f64;
    Ok(Spectrum {
        frequencies: (0..bins).map(|k| k as f64 * resolution).collect(),
        psd,
        resolution,
    })
}
