//! Operator registry and composition.
//!
//! A [`PipelineSpec`] is an ordered list of [`OpSpec`]s. For each sample
//! and each operator position the pipeline derives one random stream and
//! splits it three ways: a `coin` deciding inclusion, a `magnitude` stream
//! for the operator strength and a `noise` stream for per-pixel or
//! per-sample realizations. In batch-consistent mode the magnitude stream is
//! keyed by batch instead of by sample, so every sample in a batch gets the
//! same strength while still flipping its own coin.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, SeededRng};
use crate::signal_ops::{
    self, add_baseline_wander, add_gaussian_noise, magnitude_warp, scale_signal, uniform_in, uniform_phase,
};
use crate::types::{ClipShape, Sample};
use crate::video_ops::{
    self, adjust_brightness, adjust_saturation, apply_geometric, camera_noise, random_erase_sized, Axis,
    GeometricOp,
};

pub const DEFAULT_PROB: f64 = 0.5;
pub const AUGMENT_STAGE: &str = "augment";
pub const AUGMENT_BATCH_STAGE: &str = "augment-batch";
pub const SWEEP_STAGE: &str = "sweep";

type Range = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpName {
    Rotate,
    TranslateX,
    TranslateY,
    ShearX,
    ShearY,
    Flip,
    RandomErase,
    Brightness,
    Saturation,
    CameraNoise,
    GaussianNoise,
    BaselineWander,
    Scaling,
    MagnitudeWarp,
}

impl OpName {
    pub const ALL: [OpName; 14] = [
        OpName::Rotate,
        OpName::TranslateX,
        OpName::TranslateY,
        OpName::ShearX,
        OpName::ShearY,
        OpName::Flip,
        OpName::RandomErase,
        OpName::Brightness,
        OpName::Saturation,
        OpName::CameraNoise,
        OpName::GaussianNoise,
        OpName::BaselineWander,
        OpName::Scaling,
        OpName::MagnitudeWarp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpName::Rotate => "rotate",
            OpName::TranslateX => "translate_x",
            OpName::TranslateY => "translate_y",
            OpName::ShearX => "shear_x",
            OpName::ShearY => "shear_y",
            OpName::Flip => "flip",
            OpName::RandomErase => "random_erase",
            OpName::Brightness => "brightness",
            OpName::Saturation => "saturation",
            OpName::CameraNoise => "camera_noise",
            OpName::GaussianNoise => "gaussian_noise",
            OpName::BaselineWander => "baseline_wander",
            OpName::Scaling => "scaling",
            OpName::MagnitudeWarp => "magnitude_warp",
        }
    }

    /// True for operators that act on frames, false for label operators.
    pub fn is_video(self) -> bool {
        !matches!(
            self,
            OpName::GaussianNoise | OpName::BaselineWander | OpName::Scaling | OpName::MagnitudeWarp
        )
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            OpName::Rotate => &["degrees", "fill"],
            OpName::TranslateX | OpName::TranslateY => &["fraction", "fill"],
            OpName::ShearX | OpName::ShearY => &["shear", "fill"],
            OpName::Flip => &["fill"],
            OpName::RandomErase => &["size"],
            OpName::Brightness | OpName::Saturation | OpName::Scaling => &["factor"],
            OpName::CameraNoise => &["sigma_s_sq", "sigma_c_sq"],
            OpName::GaussianNoise => &["variance"],
            OpName::BaselineWander => &["amplitude", "freq_hz"],
            OpName::MagnitudeWarp => &["sigma", "knots"],
        }
    }
}

impl fmt::Display for OpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optional magnitude ranges; unset fields take the operator's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpParams {
    /// Rotation angle range in degrees.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Range>,
    /// Translation range as a fraction of the frame side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shear: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_s_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_c_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_hz: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fill: Option<f32>,
}

impl OpParams {
    fn set_fields(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        macro_rules! check {
            ($($f:ident),*) => { $( if self.$f.is_some() { v.push(stringify!($f)); } )* };
        }
        check!(degrees, fraction, shear, factor, size, sigma_s_sq, sigma_c_sq, variance, amplitude, freq_hz, sigma, knots, fill);
        v
    }
}

fn default_prob() -> f64 {
    DEFAULT_PROB
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSpec {
    pub name: OpName,
    #[serde(default)]
    pub params: OpParams,
    #[serde(default = "default_prob")]
    pub prob: f64,
}

impl OpSpec {
    pub fn new(name: OpName) -> Self {
        Self {
            name,
            params: OpParams::default(),
            prob: DEFAULT_PROB,
        }
    }

    pub fn with_prob(mut self, prob: f64) -> Self {
        self.prob = prob;
        self
    }

    pub fn with_params(mut self, params: OpParams) -> Self {
        self.params = params;
        self
    }

    /// Checks the spec and fills in default ranges.
    pub fn resolve(&self) -> Result<Operator> {
        if !(0.0..=1.0).contains(&self.prob) {
            return Err(Error::param(format!("{}: prob {} outside [0, 1]", self.name, self.prob)));
        }
        let allowed = self.name.allowed_params();
        if let Some(extra) = self.params.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            return Err(Error::param(format!(
                "{}: parameter {extra:?} does not apply (accepted: {})",
                self.name,
                allowed.join(", ")
            )));
        }
        let p = &self.params;
        let name = self.name;
        let ordered = |r: Range, what: &str| -> Result<Range> {
            if r.0.is_finite() && r.1.is_finite() && r.0 <= r.1 {
                Ok(r)
            } else {
                Err(Error::param(format!("{name}: {what} range ({}, {}) is not ordered", r.0, r.1)))
            }
        };
        let within = |r: Range, lo: f64, hi: f64, what: &str| -> Result<Range> {
            let r = ordered(r, what)?;
            if r.0 < lo || r.1 > hi {
                return Err(Error::param(format!(
                    "{name}: {what} range ({}, {}) leaves [{lo}, {hi}]",
                    r.0, r.1
                )));
            }
            Ok(r)
        };
        let fill = p.fill.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&fill) {
            return Err(Error::param(format!("{name}: fill {fill} outside [0, 1]")));
        }

        Ok(match name {
            OpName::Rotate => Operator::Rotate {
                degrees: within(p.degrees.unwrap_or(video_ops::DEFAULT_ROTATE_DEGREES), -180.0, 180.0, "degrees")?,
                fill,
            },
            OpName::TranslateX | OpName::TranslateY => Operator::Translate {
                axis: if name == OpName::TranslateX { Axis::X } else { Axis::Y },
                fraction: within(p.fraction.unwrap_or(video_ops::DEFAULT_TRANSLATE_FRACTION), -1.0, 1.0, "fraction")?,
                fill,
            },
            OpName::ShearX | OpName::ShearY => Operator::Shear {
                axis: if name == OpName::ShearX { Axis::X } else { Axis::Y },
                range: ordered(p.shear.unwrap_or(video_ops::DEFAULT_SHEAR), "shear")?,
                fill,
            },
            OpName::Flip => Operator::Flip { fill },
            OpName::RandomErase => {
                let size = p.size.unwrap_or(video_ops::DEFAULT_ERASE_SIZE);
                if size == 0 {
                    return Err(Error::param("random_erase: size must be >= 1"));
                }
                Operator::RandomErase { size }
            }
            OpName::Brightness | OpName::Saturation => {
                let factor = ordered(p.factor.unwrap_or(video_ops::APPEARANCE_FACTOR_RANGE), "factor")?;
                if factor.0 < 0.0 || (name == OpName::Brightness && factor.0 <= 0.0) {
                    return Err(Error::param(format!("{name}: factor must be positive")));
                }
                if name == OpName::Brightness {
                    Operator::Brightness { factor }
                } else {
                    Operator::Saturation { factor }
                }
            }
            OpName::CameraNoise => {
                let model = video_ops::PoissonGaussian::new(
                    p.sigma_s_sq.unwrap_or(video_ops::DEFAULT_SIGMA_S_SQ),
                    p.sigma_c_sq.unwrap_or(video_ops::DEFAULT_SIGMA_C_SQ),
                )?;
                Operator::CameraNoise { model }
            }
            OpName::GaussianNoise => {
                let variance = p.variance.unwrap_or(signal_ops::DEFAULT_GAUSSIAN_VARIANCE);
                if !(variance >= 0.0 && variance.is_finite()) {
                    return Err(Error::param("gaussian_noise: variance must be >= 0"));
                }
                Operator::GaussianNoise { variance }
            }
            OpName::BaselineWander => Operator::BaselineWander {
                amplitude: within(
                    p.amplitude.unwrap_or((0.0, signal_ops::MAX_WANDER_AMPLITUDE)),
                    0.0,
                    signal_ops::MAX_WANDER_AMPLITUDE,
                    "amplitude",
                )?,
                freq_hz: within(
                    p.freq_hz.unwrap_or((0.0, signal_ops::MAX_WANDER_FREQ_HZ)),
                    0.0,
                    signal_ops::MAX_WANDER_FREQ_HZ,
                    "freq_hz",
                )?,
            },
            OpName::Scaling => {
                let factor = ordered(p.factor.unwrap_or(signal_ops::SCALE_RANGE), "factor")?;
                if factor.0 <= 0.0 {
                    return Err(Error::param("scaling: factor must be positive"));
                }
                Operator::Scaling { factor }
            }
            OpName::MagnitudeWarp => {
                let sigma = within(
                    p.sigma.unwrap_or((0.0, signal_ops::MAX_WARP_SIGMA)),
                    0.0,
                    signal_ops::MAX_WARP_SIGMA,
                    "sigma",
                )?;
                if sigma.1 <= 0.0 {
                    return Err(Error::param("magnitude_warp: sigma range must reach above 0"));
                }
                let knots = p.knots.unwrap_or(signal_ops::DEFAULT_WARP_KNOTS);
                if knots < 2 {
                    return Err(Error::param("magnitude_warp: knots must be >= 2"));
                }
                Operator::MagnitudeWarp { sigma, knots }
            }
        })
    }
}

/// A validated operator with concrete magnitude ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operator {
    Rotate { degrees: Range, fill: f32 },
    Translate { axis: Axis, fraction: Range, fill: f32 },
    Shear { axis: Axis, range: Range, fill: f32 },
    Flip { fill: f32 },
    RandomErase { size: usize },
    Brightness { factor: Range },
    Saturation { factor: Range },
    CameraNoise { model: video_ops::PoissonGaussian },
    GaussianNoise { variance: f64 },
    BaselineWander { amplitude: Range, freq_hz: Range },
    Scaling { factor: Range },
    MagnitudeWarp { sigma: Range, knots: usize },
}

impl Operator {
    /// Draws the strength for one application.
    pub fn draw(&self, rng: &mut SeededRng, shape: ClipShape) -> Action {
        match *self {
            Operator::Rotate { degrees, fill } => Action::Geometric {
                op: GeometricOp::Rotate {
                    theta: uniform_in(rng, degrees).to_radians(),
                },
                fill,
            },
            Operator::Translate { axis, fraction, fill } => {
                let side = match axis {
                    Axis::X => shape.width,
                    Axis::Y => shape.height,
                } as f64;
                // Whole-pixel shifts keep translate X and Y exactly commutative.
                let m = (uniform_in(rng, fraction) * side).round();
                Action::Geometric {
                    op: GeometricOp::Translate { axis, m },
                    fill,
                }
            }
            Operator::Shear { axis, range, fill } => Action::Geometric {
                op: GeometricOp::Shear {
                    axis,
                    m: uniform_in(rng, range),
                },
                fill,
            },
            Operator::Flip { fill } => Action::Geometric {
                op: GeometricOp::Flip,
                fill,
            },
            Operator::RandomErase { size } => Action::RandomErase { size },
            Operator::Brightness { factor } => Action::Brightness(uniform_in(rng, factor)),
            Operator::Saturation { factor } => Action::Saturation(uniform_in(rng, factor)),
            Operator::CameraNoise { model } => Action::CameraNoise(model),
            Operator::GaussianNoise { variance } => Action::GaussianNoise(variance),
            Operator::BaselineWander { amplitude, freq_hz } => Action::BaselineWander {
                amplitude: uniform_in(rng, amplitude),
                freq_hz: uniform_in(rng, freq_hz),
                phase: uniform_phase(rng),
            },
            Operator::Scaling { factor } => Action::Scale(uniform_in(rng, factor)),
            Operator::MagnitudeWarp { sigma, knots } => {
                // Upper-inclusive draw so sigma is never exactly 0.
                let u: f64 = rng.random();
                Action::MagnitudeWarp {
                    sigma: sigma.1 - (sigma.1 - sigma.0) * u,
                    knots,
                }
            }
        }
    }
}

/// One operator application with its strength fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Geometric { op: GeometricOp, fill: f32 },
    RandomErase { size: usize },
    Brightness(f64),
    Saturation(f64),
    CameraNoise(video_ops::PoissonGaussian),
    GaussianNoise(f64),
    BaselineWander { amplitude: f64, freq_hz: f64, phase: f64 },
    Scale(f64),
    MagnitudeWarp { sigma: f64, knots: usize },
}

impl Action {
    /// Applies the action; video actions replace only the clip, signal
    /// actions only the trace.
    pub fn apply(&self, mut sample: Sample, noise: &SeededRng) -> Result<Sample> {
        match *self {
            Action::Geometric { op, fill } => sample.clip = apply_geometric(&sample.clip, op, fill),
            Action::RandomErase { size } => sample.clip = random_erase_sized(&sample.clip, (size, size), noise)?,
            Action::Brightness(f) => sample.clip = adjust_brightness(&sample.clip, f)?,
            Action::Saturation(f) => sample.clip = adjust_saturation(&sample.clip, f)?,
            Action::CameraNoise(m) => sample.clip = camera_noise(&sample.clip, m.sigma_s_sq, m.sigma_c_sq, noise)?,
            Action::GaussianNoise(v) => sample.trace = add_gaussian_noise(&sample.trace, v, &mut noise.clone())?,
            Action::BaselineWander {
                amplitude,
                freq_hz,
                phase,
            } => sample.trace = add_baseline_wander(&sample.trace, amplitude, freq_hz, phase)?,
            Action::Scale(f) => sample.trace = scale_signal(&sample.trace, f)?,
            Action::MagnitudeWarp { sigma, knots } => {
                sample.trace = magnitude_warp(&sample.trace, sigma, knots, &mut noise.clone())?
            }
        }
        Ok(sample)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub ops: Vec<OpSpec>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub batch_consistent: bool,
}

impl PipelineSpec {
    pub fn new(ops: Vec<OpSpec>, master_seed: u64) -> Self {
        Self {
            ops,
            master_seed,
            batch_consistent: false,
        }
    }

    pub fn empty(master_seed: u64) -> Self {
        Self::new(Vec::new(), master_seed)
    }

    /// Copy with every inclusion probability set to `prob`.
    pub fn with_all_probs(mut self, prob: f64) -> Self {
        self.ops.iter_mut().for_each(|o| o.prob = prob);
        self
    }

    pub fn resolve(&self) -> Result<Vec<Operator>> {
        let flips = self.ops.iter().filter(|o| o.name == OpName::Flip).count();
        if flips > 1 {
            return Err(Error::param("a pipeline may contain at most one flip"));
        }
        self.ops.iter().map(OpSpec::resolve).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve().map(drop)
    }
}

/// Where a pipeline run draws its streams from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamAddress<'a> {
    pub stage: &'a str,
    pub sample_index: u64,
    pub batch_index: u64,
}

/// Applies `spec` to one sample, using the sample's position in the
/// dataset to address its random streams.
pub fn apply_pipeline(sample: &Sample, spec: &PipelineSpec, sample_index: u64) -> Result<Sample> {
    apply_pipeline_at(
        sample,
        spec,
        StreamAddress {
            stage: AUGMENT_STAGE,
            sample_index,
            batch_index: 0,
        },
    )
}

pub fn apply_pipeline_at(sample: &Sample, spec: &PipelineSpec, at: StreamAddress<'_>) -> Result<Sample> {
    let operators = spec.resolve()?;
    let mut out = sample.clone();
    for (i, (op, op_spec)) in operators.iter().zip(&spec.ops).enumerate() {
        let base = derive_rng(spec.master_seed, at.stage, at.sample_index, i as u64);
        let mut coin = base.substream("coin", 0);
        if coin.random::<f64>() >= op_spec.prob {
            continue;
        }
        let mut magnitude = if spec.batch_consistent {
            derive_rng(spec.master_seed, AUGMENT_BATCH_STAGE, at.batch_index, i as u64).substream("magnitude", 0)
        } else {
            base.substream("magnitude", 0)
        };
        let action = op.draw(&mut magnitude, out.clip.shape());
        out = action
            .apply(out, &base.substream("noise", 0))
            .map_err(|e| Error::Pipeline {
                index: i,
                name: op_spec.name.as_str(),
                source: Box::new(e),
            })?;
    }
    Ok(out)
}

/// Applies `spec` to a whole dataset in parallel; output order matches input.
pub fn apply_pipeline_batch(samples: &[Sample], spec: &PipelineSpec, stage: &str) -> Result<Vec<Sample>> {
    spec.validate()?;
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            apply_pipeline_at(
                s,
                spec,
                StreamAddress {
                    stage,
                    sample_index: i as u64,
                    batch_index: 0,
                },
            )
        })
        .collect()
}

/// The eight-operator composition: the six strongest single video
/// operators, camera noise first, followed by the two label operators.
pub fn proposed_pipeline_spec(master_seed: u64) -> PipelineSpec {
    PipelineSpec::new(
        [
            OpName::CameraNoise,
            OpName::ShearX,
            OpName::TranslateX,
            OpName::Rotate,
            OpName::TranslateY,
            OpName::ShearY,
            OpName::GaussianNoise,
            OpName::BaselineWander,
        ]
        .into_iter()
        .map(OpSpec::new)
        .collect(),
        master_seed,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Single,
    Pairwise,
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(SweepMode::Single),
            "pairwise" => Ok(SweepMode::Pairwise),
            other => Err(Error::param(format!("unknown sweep mode {other:?}"))),
        }
    }
}

/// Scores an augmented dataset; lower is better.
pub trait Evaluator: Sync {
    fn mae(&self, augmented: &[Sample]) -> Result<f64>;
}

impl<F> Evaluator for F
where
    F: Fn(&[Sample]) -> Result<f64> + Sync,
{
    fn mae(&self, augmented: &[Sample]) -> Result<f64> {
        self(augmented)
    }
}

/// MAE per operator (single) or per ordered operator pair (pairwise).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub mode: SweepMode,
    pub labels: Vec<String>,
    /// `K` values in single mode, `K×K` row-major in pairwise mode where
    /// entry `(i, j)` is "op i then op j" and the diagonal is op i alone.
    pub values: Vec<f64>,
}

impl SweepResult {
    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match self.mode {
            SweepMode::Single => self.values[row],
            SweepMode::Pairwise => self.values[row * self.k() + col],
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.get(i, i)).collect()
    }
}

/// Runs every single operator or every ordered pair over `dataset`.
///
/// Cells share random streams by operator position, so the diagonal of a
/// pairwise sweep reproduces the single sweep exactly under the same seed.
pub fn sweep(
    dataset: &[Sample],
    ops: &[OpSpec],
    mode: SweepMode,
    master_seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<SweepResult> {
    if dataset.is_empty() {
        return Err(Error::input("sweep dataset is empty"));
    }
    if ops.is_empty() {
        return Err(Error::param("sweep needs at least one operator"));
    }
    for o in ops {
        o.resolve()?;
    }
    let k = ops.len();
    let cells: Vec<Vec<OpSpec>> = match mode {
        SweepMode::Single => ops.iter().map(|o| vec![o.clone()]).collect(),
        SweepMode::Pairwise => (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| {
                if i == j {
                    vec![ops[i].clone()]
                } else {
                    vec![ops[i].clone(), ops[j].clone()]
                }
            })
            .collect(),
    };
    // Cells run one after another; samples inside a cell run in parallel.
    let values = cells
        .into_iter()
        .map(|cell_ops| {
            let spec = PipelineSpec::new(cell_ops, master_seed);
            let augmented = apply_pipeline_batch(dataset, &spec, SWEEP_STAGE)?;
            evaluator.mae(&augmented)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SweepResult {
        mode,
        labels: ops.iter().map(|o| o.name.to_string()).collect(),
        values,
    })
}
