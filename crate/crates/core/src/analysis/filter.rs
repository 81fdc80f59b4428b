//! Butterworth bandpass design and (zero-phase) IIR filtering.
//!
//! Design follows the classic zero/pole/gain route: analog lowpass
//! prototype, lowpass-to-bandpass transform at pre-warped edges, then the
//! bilinear transform. A prototype of order N yields a bandpass with 2N
//! poles, so `b` and `a` have `2N + 1` taps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SignalTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub zero_phase: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            order: 2,
            low_hz: 0.75,
            high_hz: 2.5,
            zero_phase: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self, fps: f64) -> Result<()> {
        if self.order == 0 {
            return Err(Error::param("filter order must be >= 1"));
        }
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz) {
            return Err(Error::param(format!(
                "band edges must satisfy 0 < low < high (got {} .. {})",
                self.low_hz, self.high_hz
            )));
        }
        if self.high_hz >= fps / 2.0 {
            return Err(Error::param(format!(
                "high cutoff {} Hz is not below Nyquist ({} Hz)",
                self.high_hz,
                fps / 2.0
            )));
        }
        Ok(())
    }
}

/// Transfer-function coefficients with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoeffs {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl FilterCoeffs {
    /// Edge padding used by [`filtfilt`]: `3 * (max(len(a), len(b)) - 1)`.
    pub fn pad_len(&self) -> usize {
        3 * (self.a.len().max(self.b.len()) - 1)
    }
}

/// Digital Butterworth bandpass for sampling rate `fs`.
pub fn design_bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<FilterCoeffs> {
    FilterConfig {
        order,
        low_hz,
        high_hz,
        zero_phase: true,
    }
    .validate(fs)?;

    // Work in the normalized domain (Nyquist = 1, fs = 2) and pre-warp.
    let fs2 = 2.0;
    let warp = |f: f64| 2.0 * fs2 * (PI * (2.0 * f / fs) / fs2).tan();
    let (w1, w2) = (warp(low_hz), warp(high_hz));
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    // Analog lowpass prototype: poles on the left unit half-circle.
    let n = order as i64;
    let proto: Vec<Complex64> = (0..n)
        .map(|i| {
            let m = (-n + 1 + 2 * i) as f64;
            -Complex64::from_polar(1.0, PI * m / (2.0 * n as f64))
        })
        .collect();

    // Lowpass to bandpass: each pole splits in two, N zeros land at s = 0.
    let mut poles = Vec::with_capacity(2 * order);
    for p in &proto {
        let half = p * (bw / 2.0);
        let root = (half * half - w0 * w0).sqrt();
        poles.push(half + root);
    }
    for p in &proto {
        let half = p * (bw / 2.0);
        let root = (half * half - w0 * w0).sqrt();
        poles.push(half - root);
    }
    let zeros = vec![Complex64::new(0.0, 0.0); order];
    let gain = bw.powi(order as i32);

    // Bilinear transform; the N zeros at infinity map to z = -1.
    let k2 = 2.0 * fs2;
    let bilinear = |s: &Complex64| (k2 + s) / (k2 - s);
    let mut zd: Vec<Complex64> = zeros.iter().map(bilinear).collect();
    zd.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), poles.len() - zeros.len()));
    let pd: Vec<Complex64> = poles.iter().map(bilinear).collect();
    let num: Complex64 = zeros.iter().map(|z| k2 - z).product();
    let den: Complex64 = poles.iter().map(|p| k2 - p).product();
    let kd = gain * (num / den).re;

    let b = poly(&zd).into_iter().map(|c| kd * c.re).collect();
    let a = poly(&pd).into_iter().map(|c| c.re).collect();
    Ok(FilterCoeffs { b, a })
}

/// Monic polynomial coefficients (highest power first) from its roots.
fn poly(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c
}

/// Direct-form II transposed filter with optional initial state.
pub fn lfilter(coeffs: &FilterCoeffs, x: &[f64], zi: Option<&[f64]>) -> Vec<f64> {
    let n = coeffs.a.len().max(coeffs.b.len());
    let a0 = coeffs.a[0];
    let mut b = coeffs.b.clone();
    let mut a = coeffs.a.clone();
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    b.iter_mut().for_each(|v| *v /= a0);
    a.iter_mut().for_each(|v| *v /= a0);

    let mut z = match zi {
        Some(s) => s.to_vec(),
        None => vec![0.0; n - 1],
    };
    let mut y = Vec::with_capacity(x.len());
    for &xv in x {
        let yv = b[0] * xv + z.first().copied().unwrap_or(0.0);
        for i in 0..n.saturating_sub(2) {
            z[i] = b[i + 1] * xv + z[i + 1] - a[i + 1] * yv;
        }
        if n >= 2 {
            z[n - 2] = b[n - 1] * xv - a[n - 1] * yv;
        }
        y.push(yv);
    }
    y
}

/// Steady-state filter state for a unit step input.
pub fn lfilter_zi(coeffs: &FilterCoeffs) -> Vec<f64> {
    let n = coeffs.a.len().max(coeffs.b.len());
    if n < 2 {
        return Vec::new();
    }
    let a0 = coeffs.a[0];
    let mut b = coeffs.b.clone();
    let mut a = coeffs.a.clone();
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    b.iter_mut().for_each(|v| *v /= a0);
    a.iter_mut().for_each(|v| *v /= a0);

    let m = n - 1;
    // (I - C^T) zi = b[1:] - a[1:] * b[0], C the companion matrix of a.
    let mut lhs = DMatrix::<f64>::identity(m, m);
    for j in 0..m {
        lhs[(j, 0)] += a[j + 1];
    }
    for i in 0..m - 1 {
        lhs[(i, i + 1)] -= 1.0;
    }
    let rhs = DVector::from_iterator(m, (0..m).map(|i| b[i + 1] - a[i + 1] * b[0]));
    match lhs.lu().solve(&rhs) {
        Some(zi) => zi.iter().copied().collect(),
        None => vec![0.0; m],
    }
}

/// Forward-backward filtering with odd-reflection edge padding.
pub fn filtfilt(coeffs: &FilterCoeffs, x: &[f64]) -> Result<Vec<f64>> {
    let pad = coeffs.pad_len();
    if x.len() <= pad {
        return Err(Error::input(format!(
            "zero-phase filtering needs more than {pad} samples, got {}",
            x.len()
        )));
    }
    let n = x.len();
    let (first, last) = (x[0], x[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

    let zi = lfilter_zi(coeffs);
    let scaled = |s: f64| zi.iter().map(|z| z * s).collect::<Vec<_>>();
    let fwd = lfilter(coeffs, &ext, Some(&scaled(ext[0])));
    let mut rev: Vec<f64> = fwd.into_iter().rev().collect();
    let bwd = lfilter(coeffs, &rev, Some(&scaled(rev[0])));
    rev.clear();
    rev.extend(bwd.into_iter().rev());
    Ok(rev[pad..pad + n].to_vec())
}

/// Bandpasses a trace with a Butterworth filter designed for its frame rate.
pub fn butterworth_bandpass(trace: &SignalTrace, cfg: &FilterConfig) -> Result<SignalTrace> {
    let coeffs = design_bandpass(cfg.order, cfg.low_hz, cfg.high_hz, trace.fps())?;
    let min_len = coeffs.pad_len();
    if trace.len() <= min_len {
        return Err(Error::input(format!(
            "trace of {} samples is too short to filter (need more than {min_len})",
            trace.len()
        )));
    }
    let y = if cfg.zero_phase {
        filtfilt(&coeffs, trace.values())?
    } else {
        lfilter(&coeffs, trace.values(), None)
    };
    Ok(SignalTrace::new(y, trace.fps()))
}
