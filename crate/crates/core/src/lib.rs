//! Deterministic augmentation for paired pulse video and PPG label traces,
//! plus the preprocessing, heart-rate estimation and scoring chain used to
//! check that augmented samples keep a recoverable pulse.
//!
//! All randomness is addressed by `(master seed, stage, sample, operator)`
//! through [`rng::derive_rng`], so results do not depend on thread count or
//! evaluation order.

pub mod analysis;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod signal_ops;
pub mod synthgen;
pub mod types;
pub mod video_ops;

pub use error::{Error, Result};
pub use evaluation::{ChunkHr, HrPipeline, HrSource};
pub use pipeline::{
    apply_pipeline, proposed_pipeline_spec, sweep, OpName, OpParams, OpSpec, PipelineSpec, SweepMode, SweepResult,
};
pub use rng::{derive_rng, SeededRng};
pub use types::{validate_sample, ClipShape, Sample, SignalTrace, ValueRange, VideoClip, Violation, ViolationCode};
