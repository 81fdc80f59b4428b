//! Label-signal augmentations: additive Gaussian noise, baseline wander,
//! amplitude scaling and magnitude warping.
//!
//! All operators keep the trace length and frame rate unchanged.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::types::SignalTrace;

pub const DEFAULT_GAUSSIAN_VARIANCE: f64 = 0.5;
pub const MAX_WANDER_AMPLITUDE: f64 = 0.2;
pub const MAX_WANDER_FREQ_HZ: f64 = 0.5;
pub const SCALE_RANGE: (f64, f64) = (0.75, 1.25);
pub const MAX_WARP_SIGMA: f64 = 0.25;
pub const DEFAULT_WARP_KNOTS: usize = 4;

/// Parameter ranges the pipeline draws signal-operator magnitudes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalOpParams {
    pub gaussian_variance: f64,
    pub wander_amplitude_range: (f64, f64),
    pub wander_freq_range_hz: (f64, f64),
    pub scale_range: (f64, f64),
    pub warp_sigma_range: (f64, f64),
    pub warp_knots: usize,
}

impl Default for SignalOpParams {
    fn default() -> Self {
        Self {
            gaussian_variance: DEFAULT_GAUSSIAN_VARIANCE,
            wander_amplitude_range: (0.0, MAX_WANDER_AMPLITUDE),
            wander_freq_range_hz: (0.0, MAX_WANDER_FREQ_HZ),
            scale_range: SCALE_RANGE,
            warp_sigma_range: (0.0, MAX_WARP_SIGMA),
            warp_knots: DEFAULT_WARP_KNOTS,
        }
    }
}

impl SignalOpParams {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("wander_amplitude_range", self.wander_amplitude_range),
            ("wander_freq_range_hz", self.wander_freq_range_hz),
            ("scale_range", self.scale_range),
            ("warp_sigma_range", self.warp_sigma_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::param(format!("{name} ({lo}, {hi}) is not an ordered range")));
            }
        }
        if !(self.gaussian_variance >= 0.0) {
            return Err(Error::param("gaussian_variance must be >= 0"));
        }
        if self.warp_knots < 2 {
            return Err(Error::param("warp_knots must be >= 2"));
        }
        Ok(())
    }
}

/// Adds zero-mean white Gaussian noise of the given variance.
pub fn add_gaussian_noise(trace: &SignalTrace, variance: f64, rng: &mut SeededRng) -> Result<SignalTrace> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::param(format!("noise variance {variance} must be finite and >= 0")));
    }
    if variance == 0.0 {
        return Ok(trace.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::param(e.to_string()))?;
    let values = trace.values().iter().map(|v| v + normal.sample(rng)).collect();
    Ok(trace.with_values(values))
}

/// Adds `amplitude * sin(2π f t / fps + phase)`.
pub fn add_baseline_wander(trace: &SignalTrace, amplitude: f64, freq_hz: f64, phase: f64) -> Result<SignalTrace> {
    if !(0.0..=MAX_WANDER_AMPLITUDE).contains(&amplitude) {
        return Err(Error::param(format!(
            "wander amplitude {amplitude} outside [0, {MAX_WANDER_AMPLITUDE}]"
        )));
    }
    if !(0.0..=MAX_WANDER_FREQ_HZ).contains(&freq_hz) {
        return Err(Error::param(format!(
            "wander frequency {freq_hz} Hz outside [0, {MAX_WANDER_FREQ_HZ}]"
        )));
    }
    if !(0.0..2.0 * PI).contains(&phase) {
        return Err(Error::param(format!("wander phase {phase} outside [0, 2π)")));
    }
    if amplitude == 0.0 {
        return Ok(trace.clone());
    }
    let w = 2.0 * PI * freq_hz / trace.fps();
    let values = trace
        .values()
        .iter()
        .enumerate()
        .map(|(t, v)| v + amplitude * (w * t as f64 + phase).sin())
        .collect();
    Ok(trace.with_values(values))
}

pub fn scale_signal(trace: &SignalTrace, factor: f64) -> Result<SignalTrace> {
    if !factor.is_finite() {
        return Err(Error::param(format!("scale factor {factor} is not finite")));
    }
    Ok(trace.with_values(trace.values().iter().map(|v| factor * v).collect()))
}

/// Multiplies the trace by a smooth random curve.
///
/// `knots` control values are drawn from N(1, sigma²), spread evenly over
/// `[0, T-1]` and joined with a natural cubic spline.
pub fn magnitude_warp(
    trace: &SignalTrace,
    sigma: f64,
    knots: usize,
    rng: &mut SeededRng,
) -> Result<SignalTrace> {
    let curve = WarpCurve::draw(trace.len(), sigma, knots, rng)?;
    Ok(curve.apply(trace))
}

/// The multiplier curve used by [`magnitude_warp`].
#[derive(Debug, Clone, PartialEq)]
pub struct WarpCurve {
    pub knot_positions: Vec<f64>,
    pub knot_values: Vec<f64>,
    pub multiplier: Vec<f64>,
}

impl WarpCurve {
    pub fn draw(len: usize, sigma: f64, knots: usize, rng: &mut SeededRng) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= MAX_WARP_SIGMA) {
            return Err(Error::param(format!(
                "warp sigma {sigma} outside (0, {MAX_WARP_SIGMA}]"
            )));
        }
        let normal = Normal::new(1.0, sigma).map_err(|e| Error::param(e.to_string()))?;
        let values: Vec<f64> = (0..knots).map(|_| normal.sample(rng)).collect();
        Self::from_knots(len, values)
    }

    /// Curve through explicit knot values spread evenly over `[0, len-1]`.
    pub fn from_knots(len: usize, knot_values: Vec<f64>) -> Result<Self> {
        if knot_values.len() < 2 {
            return Err(Error::param("magnitude warp needs at least 2 knots"));
        }
        if len < 2 {
            return Err(Error::input("magnitude warp needs a trace of at least 2 samples"));
        }
        let n = knot_values.len();
        let span = (len - 1) as f64;
        let knot_positions: Vec<f64> = (0..n).map(|k| k as f64 * span / (n - 1) as f64).collect();
        // A spline through equal knots is that constant; skip the rounding.
        let multiplier = if knot_values.iter().all(|v| *v == knot_values[0]) {
            vec![knot_values[0]; len]
        } else {
            natural_cubic_spline(&knot_positions, &knot_values, len)
        };
        Ok(Self {
            knot_positions,
            knot_values,
            multiplier,
        })
    }

    pub fn apply(&self, trace: &SignalTrace) -> SignalTrace {
        let values = trace
            .values()
            .iter()
            .zip(&self.multiplier)
            .map(|(v, m)| v * m)
            .collect();
        trace.with_values(values)
    }
}

/// Evaluates the natural cubic spline through `(xs, ys)` at `0, 1, .., len-1`.
///
/// `xs` must be strictly increasing and cover `[0, len-1]`.
fn natural_cubic_spline(xs: &[f64], ys: &[f64], len: usize) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();

    // Second derivatives with M[0] = M[n-1] = 0, interior by the Thomas algorithm.
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 1..n - 1 {
            diag[i - 1] = 2.0 * (h[i - 1] + h[i]);
            rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
        }
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for i in (1..k).rev() {
            m[i] = (rhs[i - 1] - h[i] * m[i + 1]) / diag[i - 1];
        }
    }

    let mut seg = 0;
    (0..len)
        .map(|t| {
            let t = t as f64;
            while seg + 2 < n && t > xs[seg + 1] {
                seg += 1;
            }
            let (x0, x1, hi) = (xs[seg], xs[seg + 1], h[seg]);
            let (a, b) = (x1 - t, t - x0);
            m[seg] * a * a * a / (6.0 * hi)
                + m[seg + 1] * b * b * b / (6.0 * hi)
                + (ys[seg] / hi - m[seg] * hi / 6.0) * a
                + (ys[seg + 1] / hi - m[seg + 1] * hi / 6.0) * b
        })
        .collect()
}

/// Uniform draw from a closed range; degenerate ranges return the bound.
pub(crate) fn uniform_in(rng: &mut SeededRng, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

/// Uniform phase in `[0, 2π)`.
pub(crate) fn uniform_phase(rng: &mut SeededRng) -> f64 {
    let p = 2.0 * PI * rng.random::<f64>();
    if p >= 2.0 * PI {
        0.0
    } else {
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn rng(i: u64) -> SeededRng {
        derive_rng(11, "signal-test", i, 0)
    }

    /// O(N²) DFT magnitude; independent of the FFT used by the analysis module.
    fn dft_magnitude(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * t % n) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                re.hypot(im)
            })
            .collect()
    }

    fn argmax_non_dc(mag: &[f64]) -> usize {
        (1..mag.len())
            .max_by(|&a, &b| mag[a].total_cmp(&mag[b]))
            .unwrap()
    }

    fn sine(len: usize, freq: f64, fps: f64) -> SignalTrace {
        SignalTrace::new(
            (0..len).map(|t| (2.0 * PI * freq * t as f64 / fps).sin()).collect(),
            fps,
        )
    }

    #[test]
    fn zero_variance_is_identity() {
        let tr = sine(64, 1.2, 30.0);
        assert_eq!(add_gaussian_noise(&tr, 0.0, &mut rng(0)).unwrap(), tr);
    }

    #[test]
    fn negative_variance_is_rejected() {
        let tr = sine(8, 1.0, 30.0);
        assert!(matches!(add_gaussian_noise(&tr, -0.1, &mut rng(0)), Err(Error::Param(_))));
    }

    #[test]
    fn gaussian_noise_moments() {
        let n = 100_000;
        let zero = SignalTrace::new(vec![0.0; n], 30.0);
        let out = add_gaussian_noise(&zero, 0.5, &mut rng(1)).unwrap();
        let mean = out.values().iter().sum::<f64>() / n as f64;
        let var = out.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 0.5).abs() < 0.02, "variance {var}");

        let tr = sine(n, 1.3, 30.0);
        let out = add_gaussian_noise(&tr, 0.5, &mut rng(2)).unwrap();
        let diff_mean =
            out.values().iter().zip(tr.values()).map(|(a, b)| a - b).sum::<f64>() / n as f64;
        assert!(diff_mean.abs() < 0.01, "mean {diff_mean}");
        assert_eq!(out.len(), n);
        assert_eq!(out.fps(), 30.0);
    }

    #[test]
    fn zero_amplitude_wander_is_identity() {
        let tr = sine(64, 1.2, 30.0);
        assert_eq!(add_baseline_wander(&tr, 0.0, 0.3, 1.0).unwrap(), tr);
    }

    #[test]
    fn wander_closed_form() {
        let zero = SignalTrace::new(vec![0.0; 60], 30.0);
        let out = add_baseline_wander(&zero, 0.2, 0.25, 0.0).unwrap();
        assert!((out.values()[30] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn wander_spectral_peak_at_its_frequency() {
        // 40 s at 30 fps: bin width 0.025 Hz, 0.25 Hz is bin 10.
        let zero = SignalTrace::new(vec![0.0; 1200], 30.0);
        let out = add_baseline_wander(&zero, 0.2, 0.25, 0.0).unwrap();
        assert_eq!(argmax_non_dc(&dft_magnitude(out.values())), 10);
    }

    #[test]
    fn wander_range_checks() {
        let tr = sine(8, 1.0, 30.0);
        assert!(add_baseline_wander(&tr, 0.21, 0.1, 0.0).is_err());
        assert!(add_baseline_wander(&tr, 0.1, 0.6, 0.0).is_err());
        assert!(add_baseline_wander(&tr, 0.1, 0.1, 2.0 * PI).is_err());
    }

    #[test]
    fn scale_examples() {
        let tr = SignalTrace::new(vec![1.0, -1.0, 0.5], 30.0);
        assert_eq!(scale_signal(&tr, 1.0).unwrap(), tr);
        assert_eq!(scale_signal(&tr, 1.25).unwrap().values(), &[1.25, -1.25, 0.625]);
        assert!(scale_signal(&tr, f64::NAN).is_err());
    }

    #[test]
    fn unit_knots_are_identity() {
        let tr = sine(200, 1.1, 30.0);
        let curve = WarpCurve::from_knots(tr.len(), vec![1.0; 4]).unwrap();
        assert_eq!(curve.apply(&tr), tr);
    }

    #[test]
    fn warp_passes_through_control_points() {
        // T-1 = 180 splits evenly over 4 knots: positions 0, 60, 120, 180.
        let ones = SignalTrace::new(vec![1.0; 181], 30.0);
        let out = magnitude_warp(&ones, 0.2, 4, &mut rng(5)).unwrap();
        let curve = WarpCurve::draw(181, 0.2, 4, &mut rng(5)).unwrap();
        for (pos, val) in curve.knot_positions.iter().zip(&curve.knot_values) {
            assert!((out.values()[*pos as usize] - val).abs() < 1e-12);
        }
        assert_eq!(out.len(), 181);
    }

    /// Dense-matrix natural spline; an independent route to the same curve.
    fn dense_spline(xs: &[f64], ys: &[f64], len: usize) -> Vec<f64> {
        let n = xs.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        a[(0, 0)] = 1.0;
        a[(n - 1, n - 1)] = 1.0;
        for i in 1..n - 1 {
            let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            a[(i, i - 1)] = h0 / 6.0;
            a[(i, i)] = (h0 + h1) / 3.0;
            a[(i, i + 1)] = h1 / 6.0;
            b[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
        }
        let m = a.lu().solve(&b).unwrap();
        (0..len)
            .map(|t| {
                let t = t as f64;
                let i = (0..n - 1).find(|&i| t <= xs[i + 1]).unwrap_or(n - 2);
                let h = xs[i + 1] - xs[i];
                let u = (t - xs[i]) / h;
                // Hermite-style evaluation in the local coordinate u.
                let lin = ys[i] * (1.0 - u) + ys[i + 1] * u;
                let c = h * h / 6.0;
                lin + c * (m[i] * ((1.0 - u).powi(3) - (1.0 - u)) + m[i + 1] * (u.powi(3) - u))
            })
            .collect()
    }

    #[test]
    fn spline_matches_dense_oracle() {
        for (len, knots) in [(181, 4), (100, 5), (37, 2), (500, 7)] {
            let curve = WarpCurve::draw(len, 0.25, knots, &mut rng(len as u64)).unwrap();
            let oracle = dense_spline(&curve.knot_positions, &curve.knot_values, len);
            for (a, b) in curve.multiplier.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn warp_sigma_bounds() {
        let tr = sine(32, 1.0, 30.0);
        assert!(magnitude_warp(&tr, 0.0, 4, &mut rng(0)).is_err());
        assert!(magnitude_warp(&tr, 0.26, 4, &mut rng(0)).is_err());
        assert!(magnitude_warp(&tr, 0.25, 1, &mut rng(0)).is_err());
        assert!(magnitude_warp(&tr, 0.25, 2, &mut rng(0)).is_ok());
    }

    #[test]
    fn default_params_are_valid() {
        SignalOpParams::default().validate().unwrap();
        let bad = SignalOpParams {
            scale_range: (1.3, 0.7),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scaling_keeps_spectral_peak(freq_bin in 3usize..40, factor in 0.01f64..10.0, seed in 0u64..1000) {
            let n = 128;
            let fps = 30.0;
            let freq = freq_bin as f64 * fps / n as f64;
            let base = sine(n, freq, fps);
            let noisy = add_gaussian_noise(&base, 0.05, &mut rng(seed)).unwrap();
            let scaled = scale_signal(&noisy, factor).unwrap();
            prop_assert_eq!(
                argmax_non_dc(&dft_magnitude(noisy.values())),
                argmax_non_dc(&dft_magnitude(scaled.values()))
            );
        }

        #[test]
        fn operators_preserve_length_and_fps(len in 2usize..300, seed in 0u64..1000) {
            let tr = sine(len, 1.0, 25.0);
            let mut r = rng(seed);
            let outs = [
                add_gaussian_noise(&tr, 0.5, &mut r).unwrap(),
                add_baseline_wander(&tr, 0.1, 0.3, 1.0).unwrap(),
                scale_signal(&tr, 0.8).unwrap(),
                magnitude_warp(&tr, 0.2, 4, &mut r).unwrap(),
            ];
            for o in outs {
                prop_assert_eq!(o.len(), len);
                prop_assert_eq!(o.fps(), 25.0);
            }
        }
    }
}
