//! Spectral estimation and mode extraction.
//!
//! Spectra are one-sided Welch estimates; modes are located by fitting a
//! Lorentzian inside a frequency window, tracked across sweeps by shifting
//! that window along an expected scaling, and ringdowns are fitted with an
//! exponentially damped cosine.

mod lorentzian;
mod psd;
mod ringdown;
mod tracking;

use thiserror::Error;

use crate::fit::FitError;

pub use lorentzian::{fit_lorentzian, lorentzian, ModeFit, MIN_WINDOW_BINS, SNR_THRESHOLD};
pub use psd::{power_spectrum, Spectrum, SPECTRUM_HEADER};
pub use ringdown::{fit_ringdown, RingdownFit, RingdownOptions};
pub use tracking::{
    track_modes, write_trace_csv, ModeTrace, ScalingHint, TrackInput, TrackStatus, TrackedMode,
    TrackedPoint, TRACE_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("trace too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("invalid spectral parameter: {0}")]
    InvalidParameter(String),
    #[error("no peak in window [{f_lo}, {f_hi}] Hz: {reason}")]
    NoPeak {
        f_lo: f64,
        f_hi: f64,
        reason: String,
    },
    #[error("signal is not decaying (fitted tau = {tau} s over a {length} s trace)")]
    NonDecaying { tau: f64, length: f64 },
    #[error(transparent)]
    Fit(#[from] FitError),
}
