//! FFT peak-picking heart-rate estimator.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HrOptions {
    /// Search band in Hz.
    pub band: (f64, f64),
    /// FFT length as a multiple of the trace length.
    pub pad_factor: usize,
    pub window: Window,
}

impl Default for HrOptions {
    fn default() -> Self {
        Self {
            band: (0.75, 2.5),
            pad_factor: 1,
            window: Window::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrEstimate {
    pub bpm: f64,
    pub peak_bin: usize,
    /// Width of one FFT bin in bpm.
    pub resolution_bpm: f64,
}

/// Magnitudes of bins `0..=nfft/2` of the (windowed, zero-padded) signal.
pub fn magnitude_spectrum(values: &[f64], nfft: usize, window: Window) -> Vec<f64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = match window {
                Window::None => 1.0,
                Window::Hann if n > 1 => 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos(),
                Window::Hann => 1.0,
            };
            Complex64::new(v * w, 0.0)
        })
        .collect();
    buf.resize(nfft.max(n), Complex64::new(0.0, 0.0));
    let fft = FftPlanner::new().plan_fft_forward(buf.len());
    fft.process(&mut buf);
    buf.truncate(buf.len() / 2 + 1);
    buf.into_iter().map(|c| c.norm()).collect()
}

/// Heart rate from the highest spectral peak inside `opts.band`.
pub fn estimate_hr_fft(values: &[f64], fps: f64, opts: &HrOptions) -> Result<HrEstimate> {
    if values.len() < 2 {
        return Err(Error::input("heart-rate estimation needs at least 2 samples"));
    }
    if opts.pad_factor == 0 {
        return Err(Error::param("pad factor must be >= 1"));
    }
    let nfft = values.len() * opts.pad_factor;
    let hz_per_bin = fps / nfft as f64;
    let (lo, hi) = opts.band;
    let first = (lo / hz_per_bin).ceil().max(0.0) as usize;
    let last = ((hi / hz_per_bin).floor() as usize).min(nfft / 2);
    let in_band = |k: usize| {
        let f = k as f64 * hz_per_bin;
        f >= lo && f <= hi
    };
    let bins: Vec<usize> = (first.saturating_sub(1)..=last + 1)
        .filter(|&k| k <= nfft / 2 && in_band(k))
        .collect();
    if bins.is_empty() {
        return Err(Error::input(format!(
            "no FFT bin of width {hz_per_bin:.4} Hz falls inside {lo}..{hi} Hz"
        )));
    }
    let mag = magnitude_spectrum(values, nfft, opts.window);
    let mut peak = bins[0];
    for &k in &bins[1..] {
        if mag[k] > mag[peak] {
            peak = k;
        }
    }
    Ok(HrEstimate {
        bpm: 60.0 * peak as f64 * fps / nfft as f64,
        peak_bin: peak,
        resolution_bpm: 60.0 * fps / nfft as f64,
    })
}
