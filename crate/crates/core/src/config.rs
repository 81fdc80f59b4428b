//! Configuration documents read by the command-line tools.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::FilterConfig;
use crate::error::{Error, Result};
use crate::io::Dtype;
use crate::pipeline::PipelineSpec;
use crate::preprocess::PreprocessConfig;
use crate::rng::derive_rng;
use crate::synthgen::{generate_sample, SynthConfig};
use crate::types::{Sample, MAX_HR_BPM, MIN_HR_BPM};

pub const SYNTH_STAGE: &str = "synth";

/// Where augmentation runs relative to frame differencing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentStage {
    /// Augment raw frames, then crop, resize, chunk and difference.
    #[default]
    Raw,
    /// Crop, resize, chunk and difference first, then augment each chunk.
    Diff,
}

impl std::str::FromStr for AugmentStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(AugmentStage::Raw),
            "diff" => Ok(AugmentStage::Diff),
            other => Err(Error::param(format!("unknown augment stage {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional augmentation applied during preprocessing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineSpec>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub augment_stage: AugmentStage,
    #[serde(default)]
    pub paths: RunPaths,
}

impl RunConfig {
    /// Schema-level checks that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.pipeline {
            p.validate()?;
        }
        self.preprocess.validate()?;
        if self.filter.order == 0 {
            return Err(Error::Config("filter order must be >= 1".into()));
        }
        if let Some(input) = &self.paths.input {
            if !input.exists() {
                return Err(Error::Config(format!("input path {} does not exist", input.display())));
            }
        }
        Ok(())
    }
}

/// Settings for `synth`: one template sample plus optional per-sample
/// heart-rate variation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthDatasetConfig {
    #[serde(default)]
    pub sample: SynthConfig,
    /// When set, each sample's rate is drawn uniformly from this range and
    /// rounded to a whole bpm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hr_bpm_range: Option<(f64, f64)>,
    #[serde(default)]
    pub dtype: Dtype,
}

impl SynthDatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.hr_bpm_range {
            if !(MIN_HR_BPM <= lo && lo <= hi && hi <= MAX_HR_BPM) {
                return Err(Error::param(format!(
                    "hr_bpm_range ({lo}, {hi}) must be ordered inside [{MIN_HR_BPM}, {MAX_HR_BPM}]"
                )));
            }
        }
        self.sample.validate()
    }

    /// Sample `index` of the dataset seeded by `seed`, with id `synth_NNNN`.
    pub fn generate(&self, seed: u64, index: usize) -> Result<Sample> {
        let rng = derive_rng(seed, SYNTH_STAGE, index as u64, 0);
        let mut cfg = self.sample.clone();
        if let Some((lo, hi)) = self.hr_bpm_range {
            let u: f64 = rng.substream("hr", 0).random();
            cfg.hr_bpm = (lo + (hi - lo) * u).round().clamp(lo.ceil(), hi.floor());
        }
        generate_sample(&format!("synth_{index:04}"), &cfg, &rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_uses_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.preprocess.chunk_len, 180);
        assert!(cfg.filter.zero_phase);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"filters": {}}"#).is_err());
        assert!(serde_json::from_str::<SynthDatasetConfig>(r#"{"sample": {"hr": 70}}"#).is_err());
    }

    #[test]
    fn nested_validation() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"pipeline": {"ops": [{"name": "flip"}, {"name": "flip"}]}}"#).unwrap();
        assert!(cfg.validate().unwrap_err().is_config_error());
        let cfg: RunConfig = serde_json::from_str(r#"{"paths": {"input": "/does/not/exist"}}"#).unwrap();
        assert!(cfg.validate().is_err());
        let synth: SynthDatasetConfig = serde_json::from_str(r#"{"hr_bpm_range": [40, 90]}"#).unwrap();
        assert!(synth.validate().is_err());
    }

    #[test]
    fn drawn_rates_are_whole_and_in_range() {
        let cfg: SynthDatasetConfig = serde_json::from_str(
            r#"{"sample": {"size": 4, "duration_s": 1.0}, "hr_bpm_range": [60.5, 100]}"#,
        )
        .unwrap();
        let rates: Vec<f64> = (0..20).map(|i| cfg.generate(7, i).unwrap().reference_hr.unwrap()).collect();
        assert!(rates.iter().all(|r| r.fract() == 0.0 && (61.0..=100.0).contains(r)), "{rates:?}");
        assert!(rates.iter().any(|r| *r != rates[0]));
        assert_eq!(cfg.generate(7, 3).unwrap(), cfg.generate(7, 3).unwrap());
        assert_eq!(cfg.generate(7, 3).unwrap().id, "synth_0003");
    }
}
