//! Synthetic pulse videos with a known heart rate, and a simple
//! green-channel extractor that stands in for a trained predictor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::types::{ClipShape, Sample, SignalTrace, VideoClip, MAX_HR_BPM, MIN_HR_BPM};
use crate::video_ops::camera_noise;

/// Relative pulsatile strength of the R, G and B channels.
pub const CHANNEL_WEIGHTS: [f64; 3] = [0.3, 1.0, 0.6];
pub const MAX_PULSE_AMPLITUDE: f64 = 0.05;
/// Intensity of the area outside the face region.
pub const BACKGROUND_LEVEL: f32 = 0.1;

/// Axis-aligned skin rectangle in pixels, `[left, left+width) × [top, top+height)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceRegion {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub hr_bpm: f64,
    pub fps: f64,
    pub duration_s: f64,
    pub size: usize,
    pub pulse_amplitude: f64,
    pub base_color: [f64; 3],
    /// Horizontal drift of the face region in pixels per second.
    pub motion_drift_px_per_s: Option<f64>,
    /// `(sigma_s_sq, sigma_c_sq)` sensor noise applied after rendering.
    pub sensor_noise: Option<(f64, f64)>,
    /// Skin rectangle on a dark background; `None` makes the whole frame skin.
    pub face_region: Option<FaceRegion>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            hr_bpm: 72.0,
            fps: 30.0,
            duration_s: 60.0,
            size: 72,
            pulse_amplitude: 0.02,
            base_color: [0.7, 0.5, 0.4],
            motion_drift_px_per_s: None,
            sensor_noise: None,
            face_region: None,
        }
    }
}

impl SynthConfig {
    pub fn num_frames(&self) -> usize {
        (self.fps * self.duration_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_HR_BPM..=MAX_HR_BPM).contains(&self.hr_bpm) {
            return Err(Error::param(format!(
                "hr_bpm {} outside [{MIN_HR_BPM}, {MAX_HR_BPM}]",
                self.hr_bpm
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::param("fps must be positive"));
        }
        if self.num_frames() < 2 {
            return Err(Error::param("duration must cover at least 2 frames"));
        }
        if self.size == 0 {
            return Err(Error::param("frame size must be >= 1"));
        }
        if !(0.0..=MAX_PULSE_AMPLITUDE).contains(&self.pulse_amplitude) {
            return Err(Error::param(format!(
                "pulse_amplitude {} outside [0, {MAX_PULSE_AMPLITUDE}]",
                self.pulse_amplitude
            )));
        }
        if self.base_color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::param("base_color components must lie in [0, 1]"));
        }
        let brightest = self.base_color.iter().copied().fold(f64::MIN, f64::max);
        if self.pulse_amplitude + brightest > 1.0 {
            return Err(Error::param("pulse_amplitude + max(base_color) exceeds 1"));
        }
        if self.base_color.iter().any(|c| c - self.pulse_amplitude < 0.0) {
            return Err(Error::param("pulse would drive a channel below 0"));
        }
        if let Some((s, c)) = self.sensor_noise {
            if !(s >= 0.0 && c >= 0.0) {
                return Err(Error::param("sensor noise variances must be >= 0"));
            }
        }
        if let Some(d) = self.motion_drift_px_per_s {
            if !d.is_finite() {
                return Err(Error::param("motion drift must be finite"));
            }
        }
        if let Some(f) = self.face_region {
            if !(f.width > 0.0 && f.height > 0.0) {
                return Err(Error::param("face region must have positive size"));
            }
        }
        Ok(())
    }

    /// The pulse waveform value at frame `t`.
    pub fn pulse(&self, t: usize) -> f64 {
        (2.0 * PI * (self.hr_bpm / 60.0) * t as f64 / self.fps).sin()
    }
}

/// Renders a clip whose skin pixels pulse at `cfg.hr_bpm`; the trace is the
/// unit-amplitude pulse sinusoid and `reference_hr` is set to `cfg.hr_bpm`.
pub fn generate_sample(id: &str, cfg: &SynthConfig, rng: &SeededRng) -> Result<Sample> {
    cfg.validate()?;
    let t_len = cfg.num_frames();
    let side = cfg.size;
    let shape = ClipShape::new(t_len, side, side, 3);
    let mut data = Vec::with_capacity(shape.len());
    let drift = cfg.motion_drift_px_per_s.unwrap_or(0.0);

    for t in 0..t_len {
        let p = cfg.pulse(t);
        let skin: [f32; 3] =
            std::array::from_fn(|c| (cfg.base_color[c] + cfg.pulse_amplitude * p * CHANNEL_WEIGHTS[c]) as f32);
        match cfg.face_region {
            None => {
                for _ in 0..side * side {
                    data.extend_from_slice(&skin);
                }
            }
            Some(f) => {
                let shift = drift * t as f64 / cfg.fps;
                for y in 0..side {
                    let yc = y as f64 + 0.5;
                    let row_in = yc >= f.top && yc < f.top + f.height;
                    for x in 0..side {
                        let xc = x as f64 + 0.5 - shift;
                        if row_in && xc >= f.left && xc < f.left + f.width {
                            data.extend_from_slice(&skin);
                        } else {
                            data.extend_from_slice(&[BACKGROUND_LEVEL; 3]);
                        }
                    }
                }
            }
        }
    }
    let mut clip = VideoClip::new(data, shape, cfg.fps)?;
    if let Some((s, c)) = cfg.sensor_noise {
        clip = camera_noise(&clip, s, c, &rng.substream("sensor-noise", 0))?;
    }
    let trace = SignalTrace::new((0..t_len).map(|t| cfg.pulse(t)).collect(), cfg.fps);
    Ok(Sample::new(id, clip, trace).with_reference_hr(cfg.hr_bpm))
}

/// Mean-subtracted spatial mean of the green channel over the central half
/// of each frame.
pub fn oracle_extract(sample: &Sample) -> Result<SignalTrace> {
    let clip = &sample.clip;
    let s = clip.shape();
    if s.channels != 3 {
        return Err(Error::param(format!(
            "oracle extraction needs RGB frames, clip has {} channel(s)",
            s.channels
        )));
    }
    let (y0, y1) = central_half(s.height);
    let (x0, x1) = central_half(s.width);
    let count = ((y1 - y0) * (x1 - x0)) as f64;
    let mut values: Vec<f64> = (0..s.frames)
        .map(|t| {
            let frame = clip.frame(t);
            let mut sum = 0.0f64;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += frame[(y * s.width + x) * 3 + 1] as f64;
                }
            }
            sum / count
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    Ok(SignalTrace::new(values, clip.fps()))
}

/// `[n/4, n/4 + ceil(n/2))`, never empty for `n >= 1`.
fn central_half(n: usize) -> (usize, usize) {
    let start = n / 4;
    let len = n.div_ceil(2).max(1);
    (start, (start + len).min(n))
}
