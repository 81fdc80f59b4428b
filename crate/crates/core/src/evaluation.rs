//! Per-chunk heart-rate estimation for samples, and the MAE evaluator the
//! sweep harness uses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{butterworth_bandpass, compute_metrics, estimate_hr_fft, FilterConfig, HrOptions};
use crate::error::{Error, Result};
use crate::pipeline::Evaluator;
use crate::synthgen::oracle_extract;
use crate::types::{Sample, SignalTrace};

/// Which half of a sample the heart rate is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HrSource {
    /// Green-channel extraction from the frames.
    #[default]
    Clip,
    /// The label trace as stored.
    Trace,
}

impl std::str::FromStr for HrSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clip" => Ok(HrSource::Clip),
            "trace" => Ok(HrSource::Trace),
            other => Err(Error::param(format!("unknown heart-rate source {other:?}"))),
        }
    }
}

/// One heart-rate value for one chunk of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkHr {
    pub sample_id: String,
    pub chunk_index: usize,
    pub bpm: f64,
}

/// Signal → band-pass → FFT peak, per fixed-length chunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrPipeline {
    pub source: HrSource,
    pub filter: FilterConfig,
    pub hr: HrOptions,
    /// `None` estimates once over the whole trace.
    pub chunk_len: Option<usize>,
}

impl Default for HrPipeline {
    fn default() -> Self {
        Self {
            source: HrSource::Clip,
            filter: FilterConfig::default(),
            hr: HrOptions::default(),
            chunk_len: Some(180),
        }
    }
}

impl HrPipeline {
    pub fn whole_trace() -> Self {
        Self {
            chunk_len: None,
            ..Self::default()
        }
    }

    pub fn signal(&self, sample: &Sample) -> Result<SignalTrace> {
        match self.source {
            HrSource::Clip => oracle_extract(sample),
            HrSource::Trace => Ok(sample.trace.clone()),
        }
    }

    fn windows(&self, sample_id: &str, len: usize) -> Result<Vec<(usize, usize)>> {
        match self.chunk_len {
            None => Ok(vec![(0, len)]),
            Some(c) if c < 2 => Err(Error::param("chunk_len must be >= 2")),
            Some(c) if len < c => Err(Error::input(format!(
                "sample {sample_id} has {len} frames, fewer than one {c}-frame chunk"
            ))),
            Some(c) => Ok((0..len / c).map(|i| (i * c, (i + 1) * c)).collect()),
        }
    }

    pub fn estimate(&self, sample: &Sample) -> Result<Vec<ChunkHr>> {
        let signal = self.signal(sample)?;
        let windows = self.windows(&sample.id, signal.len())?;
        windows
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let piece = SignalTrace::new(signal.values()[a..b].to_vec(), signal.fps());
                let filtered = butterworth_bandpass(&piece, &self.filter)?;
                let est = estimate_hr_fft(filtered.values(), filtered.fps(), &self.hr)?;
                Ok(ChunkHr {
                    sample_id: sample.id.clone(),
                    chunk_index: i,
                    bpm: est.bpm,
                })
            })
            .collect()
    }

    /// The sample's reference heart rate repeated once per chunk.
    pub fn reference(&self, sample: &Sample) -> Result<Vec<ChunkHr>> {
        let bpm = sample
            .reference_hr
            .ok_or_else(|| Error::input(format!("sample {} has no reference heart rate", sample.id)))?;
        let len = sample.clip.num_frames().min(sample.trace.len());
        Ok(self
            .windows(&sample.id, len)?
            .into_iter()
            .enumerate()
            .map(|(i, _)| ChunkHr {
                sample_id: sample.id.clone(),
                chunk_index: i,
                bpm,
            })
            .collect())
    }
}

impl Evaluator for HrPipeline {
    /// MAE over every chunk of every sample against `reference_hr`.
    fn mae(&self, augmented: &[Sample]) -> Result<f64> {
        if augmented.is_empty() {
            return Err(Error::input("cannot evaluate an empty dataset"));
        }
        let pairs: Vec<(Vec<ChunkHr>, Vec<ChunkHr>)> = augmented
            .par_iter()
            .map(|s| Ok((self.estimate(s)?, self.reference(s)?)))
            .collect::<Result<_>>()?;
        let (pred, reference): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .flat_map(|(p, r)| p.iter().zip(r).map(|(a, b)| (a.bpm, b.bpm)))
            .unzip();
        Ok(compute_metrics(&pred, &reference)?.mae.value().unwrap_or(f64::NAN))
    }
}
