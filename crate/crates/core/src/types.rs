//! Shared data model: video clips, label traces and the paired sample.
//!
//! Frames are stored as one contiguous `f32` buffer in T×H×W×C order.
//! Label traces are kept in `f64` because everything downstream of them
//! (filtering, spectra, metrics) runs in double precision.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowest heart rate the analysis passband can represent (0.75 Hz).
pub const MIN_HR_BPM: f64 = 45.0;
/// Highest heart rate the analysis passband can represent (2.5 Hz).
pub const MAX_HR_BPM: f64 = 150.0;

/// Dimensions of a clip tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClipShape {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ClipShape {
    pub fn new(frames: usize, height: usize, width: usize, channels: usize) -> Self {
        Self {
            frames,
            height,
            width,
            channels,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn len(&self) -> usize {
        self.frames * self.frame_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for ClipShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.frames, self.height, self.width, self.channels
        )
    }
}

/// The value domain a clip's pixels live in.
///
/// Raw frames are normalized intensities in `[0, 1]`. Difference frames
/// produced by preprocessing are signed and live in `[-1, 1]`; appearance
/// operators clamp to whichever domain the clip carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueRange {
    #[default]
    Unit,
    Signed,
}

impl ValueRange {
    pub fn bounds(self) -> (f32, f32) {
        match self {
            ValueRange::Unit => (0.0, 1.0),
            ValueRange::Signed => (-1.0, 1.0),
        }
    }

    #[inline]
    pub fn clamp(self, v: f32) -> f32 {
        let (lo, hi) = self.bounds();
        v.clamp(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    data: Vec<f32>,
    shape: ClipShape,
    fps: f64,
    range: ValueRange,
}

impl VideoClip {
    /// Wraps a T×H×W×C buffer. Only the element count is checked here;
    /// content invariants are reported by [`validate_sample`].
    pub fn new(data: Vec<f32>, shape: ClipShape, fps: f64) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::input(format!(
                "clip buffer holds {} values but shape {} needs {}",
                data.len(),
                shape,
                shape.len()
            )));
        }
        Ok(Self {
            data,
            shape,
            fps,
            range: ValueRange::Unit,
        })
    }

    pub fn filled(shape: ClipShape, fps: f64, value: f32) -> Self {
        Self {
            data: vec![value; shape.len()],
            shape,
            fps,
            range: ValueRange::Unit,
        }
    }

    pub fn with_range(mut self, range: ValueRange) -> Self {
        self.range = range;
        self
    }

    pub fn shape(&self) -> ClipShape {
        self.shape
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn num_frames(&self) -> usize {
        self.shape.frames
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.shape.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f32] {
        let n = self.shape.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    /// Iterator over frames as H×W×C slices.
    pub fn frames(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.shape.frame_len().max(1))
    }

    #[inline]
    pub fn index(&self, t: usize, y: usize, x: usize, c: usize) -> usize {
        ((t * self.shape.height + y) * self.shape.width + x) * self.shape.channels + c
    }

    #[inline]
    pub fn get(&self, t: usize, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.index(t, y, x, c)]
    }

    /// Builds a clip of the same frame rate and range from a new buffer.
    pub(crate) fn with_data(&self, data: Vec<f32>, shape: ClipShape) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        Self {
            data,
            shape,
            fps: self.fps,
            range: self.range,
        }
    }
}

/// A label waveform with one value per video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    values: Vec<f64>,
    fps: f64,
}

impl SignalTrace {
    pub fn new(values: Vec<f64>, fps: f64) -> Self {
        Self { values, fps }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            fps: self.fps,
        }
    }
}

/// One paired unit: a clip, its aligned label trace and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub clip: VideoClip,
    pub trace: SignalTrace,
    pub reference_hr: Option<f64>,
}

impl Sample {
    pub fn new(id: impl Into<String>, clip: VideoClip, trace: SignalTrace) -> Self {
        Self {
            id: id.into(),
            clip,
            trace,
            reference_hr: None,
        }
    }

    pub fn with_reference_hr(mut self, bpm: f64) -> Self {
        self.reference_hr = Some(bpm);
        self
    }
}

/// Machine-readable identifier for a violated sample invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    TooFewFrames,
    EmptyFrame,
    BadChannels,
    BadFps,
    NonFinitePixel,
    PixelOutOfRange,
    LengthMismatch,
    FpsMismatch,
    NonFiniteSignal,
    ReferenceHrOutOfRange,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::TooFewFrames => "too-few-frames",
            ViolationCode::EmptyFrame => "empty-frame",
            ViolationCode::BadChannels => "bad-channels",
            ViolationCode::BadFps => "bad-fps",
            ViolationCode::NonFinitePixel => "non-finite-pixel",
            ViolationCode::PixelOutOfRange => "pixel-out-of-range",
            ViolationCode::LengthMismatch => "length-mismatch",
            ViolationCode::FpsMismatch => "fps-mismatch",
            ViolationCode::NonFiniteSignal => "non-finite-signal",
            ViolationCode::ReferenceHrOutOfRange => "reference-hr-out-of-range",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

/// Checks every sample invariant and reports one entry per violated rule.
pub fn validate_sample(s: &Sample) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, detail: String| out.push(Violation { code, detail });
    let shape = s.clip.shape();

    if shape.frames < 2 {
        push(
            ViolationCode::TooFewFrames,
            format!("clip has {} frames, need at least 2", shape.frames),
        );
    }
    if shape.height == 0 || shape.width == 0 {
        push(
            ViolationCode::EmptyFrame,
            format!("frame is {}x{}", shape.height, shape.width),
        );
    }
    if shape.channels != 1 && shape.channels != 3 {
        push(
            ViolationCode::BadChannels,
            format!("{} channels, expected 1 or 3", shape.channels),
        );
    }
    if !(s.clip.fps().is_finite() && s.clip.fps() > 0.0) {
        push(ViolationCode::BadFps, format!("fps = {}", s.clip.fps()));
    }

    let data = s.clip.as_slice();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        push(
            ViolationCode::NonFinitePixel,
            format!("first non-finite value at flat index {i}"),
        );
    }
    let (lo, hi) = s.clip.range().bounds();
    if let Some(i) = data
        .iter()
        .position(|v| v.is_finite() && (*v < lo || *v > hi))
    {
        push(
            ViolationCode::PixelOutOfRange,
            format!("value {} at flat index {i} outside [{lo}, {hi}]", data[i]),
        );
    }

    if s.trace.len() != shape.frames {
        push(
            ViolationCode::LengthMismatch,
            format!(
                "clip has {} frames but trace has {} samples",
                shape.frames,
                s.trace.len()
            ),
        );
    }
    if s.trace.fps() != s.clip.fps() {
        push(
            ViolationCode::FpsMismatch,
            format!("clip fps {} vs trace fps {}", s.clip.fps(), s.trace.fps()),
        );
    }
    if let Some(i) = s.trace.values().iter().position(|v| !v.is_finite()) {
        push(
            ViolationCode::NonFiniteSignal,
            format!("first non-finite trace value at index {i}"),
        );
    }
    if let Some(hr) = s.reference_hr {
        if !(MIN_HR_BPM..=MAX_HR_BPM).contains(&hr) {
            push(
                ViolationCode::ReferenceHrOutOfRange,
                format!("reference_hr {hr} outside [{MIN_HR_BPM}, {MAX_HR_BPM}] bpm"),
            );
        }
    }
    out
}
