//! Data preparation: central crop, bilinear resize, difference frames and
//! fixed-length chunking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClipShape, Sample, SignalTrace, ValueRange, VideoClip};

pub const NORMALIZED_DIFF_EPS: f32 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffMode {
    #[default]
    Plain,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub crop: usize,
    pub resize: usize,
    pub chunk_len: usize,
    pub diff_mode: DiffMode,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            crop: 240,
            resize: 72,
            chunk_len: 180,
            diff_mode: DiffMode::Plain,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resize == 0 {
            return Err(Error::param("resize side must be >= 1"));
        }
        if self.chunk_len < 2 {
            return Err(Error::param("chunk_len must be >= 2"));
        }
        if self.crop == 0 {
            return Err(Error::param("crop side must be >= 1"));
        }
        Ok(())
    }
}

/// Keeps the central `side`×`side` window of every frame.
pub fn center_crop(clip: &VideoClip, side: usize) -> Result<VideoClip> {
    let s = clip.shape();
    if side == 0 || side > s.height.min(s.width) {
        return Err(Error::param(format!(
            "crop side {side} does not fit a {}x{} frame",
            s.height, s.width
        )));
    }
    if side == s.height && side == s.width {
        return Ok(clip.clone());
    }
    let top = (s.height - side) / 2;
    let left = (s.width - side) / 2;
    let row = side * s.channels;
    let out_shape = ClipShape::new(s.frames, side, side, s.channels);
    let mut out = Vec::with_capacity(out_shape.len());
    for t in 0..s.frames {
        for y in top..top + side {
            let start = clip.index(t, y, left, 0);
            out.extend_from_slice(&clip.as_slice()[start..start + row]);
        }
    }
    Ok(clip.with_data(out, out_shape))
}

/// Bilinear resize to `side`×`side` with the half-pixel-center convention.
pub fn resize_bilinear(clip: &VideoClip, side: usize) -> Result<VideoClip> {
    if side == 0 {
        return Err(Error::param("resize side must be >= 1"));
    }
    let s = clip.shape();
    if s.height == 0 || s.width == 0 {
        return Err(Error::input("cannot resize an empty frame"));
    }
    let taps = |src: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / side as f64;
        (0..side)
            .map(|d| {
                let pos = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
                let i0 = (pos.floor() as usize).min(src - 1);
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, pos - i0 as f64)
            })
            .collect()
    };
    let xs = taps(s.width);
    let ys = taps(s.height);
    let c = s.channels;
    let (lo, hi) = clip.range().bounds();
    let out_shape = ClipShape::new(s.frames, side, side, c);
    let mut out = vec![0.0f32; out_shape.len()];
    let frame_len = out_shape.frame_len();
    out.par_chunks_mut(frame_len)
        .enumerate()
        .for_each(|(t, dst)| {
            let src = clip.frame(t);
            let at = |y: usize, x: usize, ch: usize| src[(y * s.width + x) * c + ch] as f64;
            for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
                for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                    for ch in 0..c {
                        let top = at(y0, x0, ch) * (1.0 - fx) + at(y0, x1, ch) * fx;
                        let bot = at(y1, x0, ch) * (1.0 - fx) + at(y1, x1, ch) * fx;
                        let v = (top * (1.0 - fy) + bot * fy) as f32;
                        dst[(oy * side + ox) * c + ch] = v.clamp(lo, hi);
                    }
                }
            }
        });
    Ok(clip.with_data(out, out_shape))
}

/// Consecutive-frame differences; the result has `T-1` signed frames.
pub fn difference_frames(clip: &VideoClip, mode: DiffMode) -> Result<VideoClip> {
    let s = clip.shape();
    if s.frames < 2 {
        return Err(Error::input(format!("difference frames need T >= 2, got {}", s.frames)));
    }
    let n = s.frame_len();
    let src = clip.as_slice();
    let out: Vec<f32> = src[..(s.frames - 1) * n]
        .iter()
        .zip(&src[n..])
        .map(|(&a, &b)| match mode {
            DiffMode::Plain => b - a,
            DiffMode::Normalized => (b - a) / (b + a + NORMALIZED_DIFF_EPS),
        })
        .collect();
    let out_shape = ClipShape::new(s.frames - 1, s.height, s.width, s.channels);
    Ok(clip.with_data(out, out_shape).with_range(ValueRange::Signed))
}

/// Differences a label trace the same way as its frames so pairs stay aligned.
///
/// Plain mode takes `x[t+1] - x[t]`; normalized mode additionally divides
/// by the standard deviation of the differences (left as is when that is 0).
pub fn difference_trace(trace: &SignalTrace, mode: DiffMode) -> Result<SignalTrace> {
    if trace.len() < 2 {
        return Err(Error::input("difference trace needs at least 2 samples"));
    }
    let mut d: Vec<f64> = trace.values().windows(2).map(|w| w[1] - w[0]).collect();
    if mode == DiffMode::Normalized {
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd > 0.0 {
            d.iter_mut().for_each(|v| *v /= sd);
        }
    }
    Ok(SignalTrace::new(d, trace.fps()))
}

/// Differences both halves of a sample.
pub fn difference_sample(sample: &Sample, mode: DiffMode) -> Result<Sample> {
    Ok(Sample {
        id: sample.id.clone(),
        clip: difference_frames(&sample.clip, mode)?,
        trace: difference_trace(&sample.trace, mode)?,
        reference_hr: sample.reference_hr,
    })
}

/// Non-overlapping `chunk_len` windows; a shorter tail is dropped.
pub fn chunk(sample: &Sample, chunk_len: usize) -> Result<Vec<Sample>> {
    if chunk_len < 2 {
        return Err(Error::param("chunk_len must be >= 2"));
    }
    let s = sample.clip.shape();
    let count = s.frames.min(sample.trace.len()) / chunk_len;
    let n = s.frame_len();
    let chunk_shape = ClipShape::new(chunk_len, s.height, s.width, s.channels);
    Ok((0..count)
        .map(|i| {
            let (a, b) = (i * chunk_len, (i + 1) * chunk_len);
            Sample {
                id: chunk_id(&sample.id, i),
                clip: sample.clip.with_data(sample.clip.as_slice()[a * n..b * n].to_vec(), chunk_shape),
                trace: sample.trace.with_values(sample.trace.values()[a..b].to_vec()),
                reference_hr: sample.reference_hr,
            }
        })
        .collect())
}

pub fn chunk_id(parent: &str, index: usize) -> String {
    format!("{parent}_c{index:03}")
}

/// Crop, resize and chunk a raw sample, then difference each chunk.
pub fn preprocess_sample(sample: &Sample, cfg: &PreprocessConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let cropped = center_crop(&sample.clip, cfg.crop)?;
    let resized = resize_bilinear(&cropped, cfg.resize)?;
    let prepared = Sample {
        clip: resized,
        ..sample.clone()
    };
    chunk(&prepared, cfg.chunk_len)?
        .iter()
        .map(|c| difference_sample(c, cfg.diff_mode))
        .collect()
}
