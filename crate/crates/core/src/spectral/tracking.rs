//! Following modes across a sweep by shifting fit windows along an expected scaling.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{fit_lorentzian, ModeFit, SpectralError, Spectrum, MIN_WINDOW_BINS};

pub const TRACE_HEADER: &str = "param,f0_hz,width_hz,amplitude,status";

/// Window width in units of the last fitted linewidth.
const WIDTH_FACTOR: f64 = 10.0;

/// Expected dependence of a mode frequency on the swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingHint {
    Inverse,
    Linear,
    Sqrt,
    None,
}

impl ScalingHint {
    /// Frequency ratio predicted for moving from `from` to `to`.
    pub fn factor(&self, from: f64, to: f64) -> f64 {
        match self {
            ScalingHint::Inverse => from / to,
            ScalingHint::Linear => to / from,
            ScalingHint::Sqrt => (to / from).sqrt(),
            ScalingHint::None => 1.0,
        }
    }
}

/// A mode to follow: which spectrum channel it lives in and where it starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedMode {
    pub channel: usize,
    pub window: (f64, f64),
    pub hint: ScalingHint,
}

/// Spectra of one sweep point, indexed by channel; `None` if the run failed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackInput {
    pub param: f64,
    pub spectra: Option<Vec<Spectrum>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Ok,
    /// No acceptable peak in the window.
    Lost,
    /// Another mode on the same channel claims the same spectral range.
    Merged,
    /// No spectrum (the run escaped or failed).
    Missing,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Ok => "ok",
            TrackStatus::Lost => "lost",
            TrackStatus::Merged => "merged",
            TrackStatus::Missing => "missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackedPoint {
    pub param: f64,
    pub window: (f64, f64),
    pub fit: Option<ModeFit>,
    pub status: TrackStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeTrace {
    pub mode: TrackedMode,
    pub points: Vec<TrackedPoint>,
}

impl ModeTrace {
    /// `(param, f0)` of the successful fits.
    pub fn successes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .filter_map(|p| p.fit.as_ref().map(|f| (p.param, f.f0)))
    }
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Tracks `modes` through `inputs` (ordered by the swept parameter).
///
/// The first input with spectra must yield a fit in every initial window.
/// Later windows are centered on the last successful fit scaled by the
/// mode's hint and are `max(10·linewidth, 8 bins)` wide. Modes that cannot
/// be fitted are marked lost and never interpolated; modes on one channel
/// whose windows or fits coincide are both marked merged.
pub fn track_modes(
    inputs: &[TrackInput],
    modes: &[TrackedMode],
) -> Result<Vec<ModeTrace>, SpectralError> {
    let mut traces: Vec<ModeTrace> = modes
        .iter()
        .map(|m| ModeTrace {
            mode: *m,
            points: Vec::with_capacity(inputs.len()),
        })
        .collect();
    // (param, fit) of the last success per mode
    let mut last: Vec<Option<(f64, ModeFit)>> = vec![None; modes.len()];
    let mut started = false;

    for input in inputs {
        let Some(spectra) = &input.spectra else {
            for (trace, mode) in traces.iter_mut().zip(modes) {
                trace.points.push(TrackedPoint {
                    param: input.param,
                    window: mode.window,
                    fit: None,
                    status: TrackStatus::Missing,
                });
            }
            continue;
        };
        for m in modes {
            if m.channel >= spectra.len() {
                return Err(SpectralError::InvalidParameter(format!(
                    "mode channel {} but only {} spectra supplied",
                    m.channel,
                    spectra.len()
                )));
            }
        }

        let windows: Vec<(f64, f64)> = modes
            .iter()
            .zip(&last)
            .map(|(m, prev)| match prev {
                Some((p, fit)) if started => {
                    let spec = &spectra[m.channel];
                    let center = fit.f0 * m.hint.factor(*p, input.param);
                    let half = 0.5
                        * (WIDTH_FACTOR * fit.width).max(MIN_WINDOW_BINS as f64 * spec.resolution);
                    (center - half, center + half)
                }
                _ => m.window,
            })
            .collect();

        let mut fits: Vec<Result<ModeFit, SpectralError>> = modes
            .iter()
            .zip(&windows)
            .map(|(m, w)| fit_lorentzian(&spectra[m.channel], *w))
            .collect();

        if !started {
            if let Some(pos) = fits.iter().position(|f| f.is_err()) {
                return Err(fits.swap_remove(pos).unwrap_err());
            }
            started = true;
        }

        let mut merged = vec![false; modes.len()];
        for i in 0..modes.len() {
            for j in i + 1..modes.len() {
                if modes[i].channel != modes[j].channel {
                    continue;
                }
                let res = spectra[modes[i].channel].resolution;
                let same_peak = matches!(
                    (&fits[i], &fits[j]),
                    (Ok(a), Ok(b)) if (a.f0 - b.f0).abs() <= res
                );
                if overlaps(windows[i], windows[j]) || same_peak {
                    merged[i] = true;
                    merged[j] = true;
                }
            }
        }

        for (k, fit) in fits.into_iter().enumerate() {
            let (fit, status) = match fit {
                _ if merged[k] => (None, TrackStatus::Merged),
                Ok(f) => {
                    last[k] = Some((input.param, f));
                    (Some(f), TrackStatus::Ok)
                }
                Err(_) => (None, TrackStatus::Lost),
            };
            traces[k].points.push(TrackedPoint {
                param: input.param,
                window: windows[k],
                fit,
                status,
            });
        }
    }
    Ok(traces)
}

pub fn write_trace_csv<W: Write>(trace: &ModeTrace, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for p in &trace.points {
        match &p.fit {
            Some(f) => writeln!(
                out,
                "{},{},{},{},{}",
                p.param,
                f.f0,
                f.width,
                f.amplitude,
                p.status.as_str()
            )?,
            None => writeln!(out, "{},,,,{}", p.param, p.status.as_str())?,
        }
    }
    Ok(())
}
