//! Frame operators: geometric warps (rotate, translate, shear, flip) and
//! appearance changes (random erasing, brightness, saturation, camera noise).
//!
//! Geometric warps use inverse mapping with bilinear interpolation. Rotation
//! and shear act about the frame center `((W-1)/2, (H-1)/2)`; flip mirrors
//! about `a = W-1`. Sources outside the frame read the fill value.
//!
//! Every operator keeps T, H, W and C unchanged, and every frame is
//! processed independently so frames can be handled in parallel. Per-frame
//! randomness comes from `rng.substream("frame", t)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::types::VideoClip;

pub const DEFAULT_ERASE_SIZE: usize = 7;
pub const APPEARANCE_FACTOR_RANGE: (f64, f64) = (0.75, 1.25);
pub const DEFAULT_SIGMA_S_SQ: f64 = 0.0004;
pub const DEFAULT_SIGMA_C_SQ: f64 = 0.0004;
pub const DEFAULT_ROTATE_DEGREES: (f64, f64) = (-15.0, 15.0);
pub const DEFAULT_TRANSLATE_FRACTION: (f64, f64) = (-0.1, 0.1);
pub const DEFAULT_SHEAR: (f64, f64) = (-0.2, 0.2);

/// ITU-R BT.601 luma weights.
const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometricKind {
    Rotate,
    Translate,
    Shear,
    Flip,
}

impl FromStr for GeometricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotate" => Ok(Self::Rotate),
            "translate" => Ok(Self::Translate),
            "shear" => Ok(Self::Shear),
            "flip" => Ok(Self::Flip),
            other => Err(Error::param(format!("unknown geometric transform {other:?}"))),
        }
    }
}

/// Magnitudes for one geometric warp. One set is used for every frame of a clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    /// Rotation angle in radians.
    pub theta: f64,
    /// Translation in pixels.
    pub translate_m: f64,
    /// Shear coefficient.
    pub shear_m: f64,
    pub axis: Axis,
    pub fill: f32,
}

impl Default for GeometricParams {
    fn default() -> Self {
        Self {
            theta: 0.0,
            translate_m: 0.0,
            shear_m: 0.0,
            axis: Axis::X,
            fill: 0.0,
        }
    }
}

impl GeometricParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta.abs() <= std::f64::consts::PI) {
            return Err(Error::param(format!("theta {} outside [-π, π]", self.theta)));
        }
        if !self.translate_m.is_finite() || !self.shear_m.is_finite() {
            return Err(Error::param("geometric magnitudes must be finite"));
        }
        if !(0.0..=1.0).contains(&self.fill) {
            return Err(Error::param(format!("fill {} outside [0, 1]", self.fill)));
        }
        Ok(())
    }
}

/// A single coordinate transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometricOp {
    Rotate { theta: f64 },
    Translate { axis: Axis, m: f64 },
    Shear { axis: Axis, m: f64 },
    Flip,
}

impl GeometricOp {
    pub fn from_params(kind: GeometricKind, p: &GeometricParams) -> Self {
        match kind {
            GeometricKind::Rotate => Self::Rotate { theta: p.theta },
            GeometricKind::Translate => Self::Translate {
                axis: p.axis,
                m: p.translate_m,
            },
            GeometricKind::Shear => Self::Shear {
                axis: p.axis,
                m: p.shear_m,
            },
            GeometricKind::Flip => Self::Flip,
        }
    }

    /// The transformed coordinate of `(x, y)`.
    ///
    /// Rotation and shear are linear maps about the origin of the given
    /// coordinates; flip reflects about `a`.
    pub fn map_coords(&self, x: f64, y: f64, a: f64) -> (f64, f64) {
        match *self {
            Self::Rotate { theta } => {
                let (s, c) = theta.sin_cos();
                (x * c - y * s, x * s + y * c)
            }
            Self::Translate { axis: Axis::X, m } => (x + m, y),
            Self::Translate { axis: Axis::Y, m } => (x, y + m),
            Self::Shear { axis: Axis::X, m } => (x + m * y, y),
            Self::Shear { axis: Axis::Y, m } => (x, m * x + y),
            Self::Flip => (a - x, y),
        }
    }

    pub fn inverse(&self) -> Self {
        match *self {
            Self::Rotate { theta } => Self::Rotate { theta: -theta },
            Self::Translate { axis, m } => Self::Translate { axis, m: -m },
            Self::Shear { axis, m } => Self::Shear { axis, m: -m },
            Self::Flip => Self::Flip,
        }
    }

    /// Maps a pixel coordinate of a `width`×`height` frame.
    pub fn map_pixel(&self, x: f64, y: f64, width: usize, height: usize) -> (f64, f64) {
        match self {
            Self::Rotate { .. } | Self::Shear { .. } => {
                let cx = (width as f64 - 1.0) / 2.0;
                let cy = (height as f64 - 1.0) / 2.0;
                let (u, v) = self.map_coords(x - cx, y - cy, 0.0);
                (u + cx, v + cy)
            }
            Self::Translate { .. } => self.map_coords(x, y, 0.0),
            Self::Flip => self.map_coords(x, y, width as f64 - 1.0),
        }
    }
}

/// Resamples every frame of `clip` under the warp selected by `kind`.
pub fn warp_affine(clip: &VideoClip, params: &GeometricParams, kind: GeometricKind) -> Result<VideoClip> {
    params.validate()?;
    Ok(apply_geometric(clip, GeometricOp::from_params(kind, params), params.fill))
}

/// Inverse-maps each output pixel and samples the source bilinearly.
///
/// Out-of-frame neighbours read `fill`.
pub fn apply_geometric(clip: &VideoClip, op: GeometricOp, fill: f32) -> VideoClip {
    let shape = clip.shape();
    let (w, h, c) = (shape.width, shape.height, shape.channels);
    let inv = op.inverse();

    // Taps are identical for every frame and channel, so build them once.
    let taps: Vec<[Tap; 4]> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let (sx, sy) = inv.map_pixel(x as f64, y as f64, w, h);
            bilinear_taps(sx, sy, w, h)
        })
        .collect();

    let mut out = vec![0.0f32; shape.len()];
    let frame_len = shape.frame_len();
    if frame_len == 0 {
        return clip.with_data(out, shape);
    }
    let fill = fill as f64;
    out.par_chunks_mut(frame_len)
        .zip(clip.as_slice().par_chunks(frame_len))
        .for_each(|(dst, src)| {
            for (p, t) in taps.iter().enumerate() {
                for ch in 0..c {
                    let mut v = 0.0f64;
                    for tap in t {
                        let s = match tap.pixel {
                            Some(i) => src[i * c + ch] as f64,
                            None => fill,
                        };
                        v += s * tap.weight;
                    }
                    dst[p * c + ch] = v as f32;
                }
            }
        });
    clip.with_data(out, shape)
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    /// Source pixel index, `None` outside the frame.
    pixel: Option<usize>,
    weight: f64,
}

fn bilinear_taps(sx: f64, sy: f64, w: usize, h: usize) -> [Tap; 4] {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let at = |xi: f64, yi: f64, weight: f64| {
        let pixel = if xi < 0.0 || yi < 0.0 || xi >= w as f64 || yi >= h as f64 {
            None
        } else {
            Some(yi as usize * w + xi as usize)
        };
        Tap { pixel, weight }
    };
    [
        at(x0, y0, (1.0 - fx) * (1.0 - fy)),
        at(x0 + 1.0, y0, fx * (1.0 - fy)),
        at(x0, y0 + 1.0, (1.0 - fx) * fy),
        at(x0 + 1.0, y0 + 1.0, fx * fy),
    ]
}

/// Magnitudes for the appearance operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppearanceParams {
    pub erase_size: (usize, usize),
    pub brightness_factor: f64,
    pub saturation_factor: f64,
    pub sigma_s_sq: f64,
    pub sigma_c_sq: f64,
}

impl Default for AppearanceParams {
    fn default() -> Self {
        Self {
            erase_size: (DEFAULT_ERASE_SIZE, DEFAULT_ERASE_SIZE),
            brightness_factor: 1.0,
            saturation_factor: 1.0,
            sigma_s_sq: DEFAULT_SIGMA_S_SQ,
            sigma_c_sq: DEFAULT_SIGMA_C_SQ,
        }
    }
}

/// Replaces one randomly placed 7×7 block per frame with uniform noise.
pub fn random_erase(clip: &VideoClip, rng: &SeededRng) -> Result<VideoClip> {
    random_erase_sized(clip, (DEFAULT_ERASE_SIZE, DEFAULT_ERASE_SIZE), rng)
}

/// [`random_erase`] with an explicit `(height, width)` block size.
pub fn random_erase_sized(clip: &VideoClip, (eh, ew): (usize, usize), rng: &SeededRng) -> Result<VideoClip> {
    let shape = clip.shape();
    if eh == 0 || ew == 0 {
        return Err(Error::param("erase block must be at least 1x1"));
    }
    if shape.height < eh || shape.width < ew {
        return Err(Error::param(format!(
            "frame {}x{} is smaller than the {eh}x{ew} erase block",
            shape.height, shape.width
        )));
    }
    let (lo, hi) = clip.range().bounds();
    let (w, c) = (shape.width, shape.channels);
    let mut out = clip.clone();
    let frame_len = shape.frame_len();
    out.as_mut_slice()
        .par_chunks_mut(frame_len)
        .enumerate()
        .for_each(|(t, frame)| {
            let mut r = rng.substream("frame", t as u64);
            let top = r.random_range(0..=shape.height - eh);
            let left = r.random_range(0..=shape.width - ew);
            for y in top..top + eh {
                for x in left..left + ew {
                    for ch in 0..c {
                        let u: f32 = r.random();
                        frame[(y * w + x) * c + ch] = lo + (hi - lo) * u;
                    }
                }
            }
        });
    Ok(out)
}

/// Top-left corner chosen by [`random_erase_sized`] for frame `t`.
pub fn erase_corner(shape_hw: (usize, usize), (eh, ew): (usize, usize), rng: &SeededRng, t: usize) -> (usize, usize) {
    let mut r = rng.substream("frame", t as u64);
    let top = r.random_range(0..=shape_hw.0 - eh);
    let left = r.random_range(0..=shape_hw.1 - ew);
    (top, left)
}

/// Multiplies every value by `factor` and clamps to the clip's range.
pub fn adjust_brightness(clip: &VideoClip, factor: f64) -> Result<VideoClip> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::param(format!("brightness factor {factor} must be positive")));
    }
    let range = clip.range();
    let f = factor as f32;
    let mut out = clip.clone();
    out.as_mut_slice()
        .par_iter_mut()
        .for_each(|v| *v = range.clamp(*v * f));
    Ok(out)
}

/// Scales each channel's distance from the pixel's luma by `factor`.
pub fn adjust_saturation(clip: &VideoClip, factor: f64) -> Result<VideoClip> {
    if clip.channels() != 3 {
        return Err(Error::param(format!(
            "saturation needs 3 channels, clip has {}",
            clip.channels()
        )));
    }
    if !(factor >= 0.0 && factor.is_finite()) {
        return Err(Error::param(format!("saturation factor {factor} must be >= 0")));
    }
    let mut out = clip.clone();
    if factor == 1.0 {
        return Ok(out);
    }
    let range = clip.range();
    let f = factor as f32;
    out.as_mut_slice().par_chunks_mut(3).for_each(|px| {
        let luma = LUMA[0] * px[0] + LUMA[1] * px[1] + LUMA[2] * px[2];
        for v in px.iter_mut() {
            *v = range.clamp(luma + f * (*v - luma));
        }
    });
    Ok(out)
}

/// Poisson-Gaussian sensor noise: `n ~ N(0, sigma_s_sq * x + sigma_c_sq)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonGaussian {
    pub sigma_s_sq: f64,
    pub sigma_c_sq: f64,
}

impl PoissonGaussian {
    pub fn new(sigma_s_sq: f64, sigma_c_sq: f64) -> Result<Self> {
        if !(sigma_s_sq >= 0.0 && sigma_c_sq >= 0.0 && sigma_s_sq.is_finite() && sigma_c_sq.is_finite()) {
            return Err(Error::param(format!(
                "noise variances must be finite and >= 0 (got {sigma_s_sq}, {sigma_c_sq})"
            )));
        }
        Ok(Self {
            sigma_s_sq,
            sigma_c_sq,
        })
    }

    /// Noise variance at intensity `x`. Negative intensities (difference
    /// frames) contribute no signal-dependent term.
    #[inline]
    pub fn variance(&self, x: f64) -> f64 {
        self.sigma_s_sq * x.max(0.0) + self.sigma_c_sq
    }

    /// `x + n` before clamping.
    #[inline]
    pub fn perturb<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        x + self.variance(x).sqrt() * z
    }
}

pub fn camera_noise(clip: &VideoClip, sigma_s_sq: f64, sigma_c_sq: f64, rng: &SeededRng) -> Result<VideoClip> {
    let model = PoissonGaussian::new(sigma_s_sq, sigma_c_sq)?;
    if sigma_s_sq == 0.0 && sigma_c_sq == 0.0 {
        return Ok(clip.clone());
    }
    let range = clip.range();
    let mut out = clip.clone();
    let frame_len = clip.shape().frame_len().max(1);
    out.as_mut_slice()
        .par_chunks_mut(frame_len)
        .enumerate()
        .for_each(|(t, frame)| {
            let mut r = rng.substream("frame", t as u64);
            for v in frame.iter_mut() {
                *v = range.clamp(model.perturb(*v as f64, &mut r) as f32);
            }
        });
    Ok(out)
}

impl fmt::Display for GeometricOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rotate { theta } => write!(f, "rotate({:.3}°)", theta.to_degrees()),
            Self::Translate { axis, m } => write!(f, "translate_{axis:?}({m})"),
            Self::Shear { axis, m } => write!(f, "shear_{axis:?}({m})"),
            Self::Flip => f.write_str("flip"),
        }
    }
}
