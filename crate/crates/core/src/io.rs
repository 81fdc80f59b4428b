//! On-disk formats: the sample container, heart-rate and metrics files and
//! sweep tables.
//!
//! A container is a directory with three files:
//!
//! * `meta.json`: shape, fps, dtype and optional reference heart rate
//! * `frames.bin`: little-endian pixels in T×H×W×C order, `u8` or `f32`
//! * `signal.bin`: little-endian `f32` label trace, one value per frame
//!
//! Every writer here emits the same bytes for the same input, so output
//! trees can be compared with a plain byte diff.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::MetricsReport;
use crate::error::{Error, Result};
use crate::evaluation::ChunkHr;
use crate::pipeline::{SweepMode, SweepResult};
use crate::types::{ClipShape, Sample, SignalTrace, ValueRange, VideoClip};

pub const SCHEMA_VERSION: u32 = 1;
pub const LAYOUT: &str = "THWC";
pub const META_FILE: &str = "meta.json";
pub const FRAMES_FILE: &str = "frames.bin";
pub const SIGNAL_FILE: &str = "signal.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    #[default]
    F32,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::F32 => 4,
        }
    }
}

fn is_unit(r: &ValueRange) -> bool {
    *r == ValueRange::Unit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMeta {
    pub schema_version: u32,
    pub id: String,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub fps: f64,
    pub dtype: Dtype,
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_hr: Option<f64>,
    /// Present only for signed (difference) clips.
    #[serde(default, skip_serializing_if = "is_unit")]
    pub value_range: ValueRange,
}

impl SampleMeta {
    pub fn shape(&self) -> ClipShape {
        ClipShape::new(self.frames, self.height, self.width, self.channels)
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s.into_bytes()
}

/// Reads a JSON document; malformed or schema-violating files are
/// configuration errors.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_bytes(path, &json_bytes(value))
}

fn check_size(path: &Path, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes, found {actual}"),
        ));
    }
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<SampleMeta> {
    let path = dir.join(META_FILE);
    let bytes = read_bytes(&path)?;
    let raw: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, e.to_string()))?;
    match raw.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(Error::format(&path, format!("unknown schema_version {v}"))),
        None => return Err(Error::format(&path, "missing schema_version")),
    }
    let meta: SampleMeta = serde_json::from_value(raw).map_err(|e| Error::format(&path, e.to_string()))?;
    if meta.layout != LAYOUT {
        return Err(Error::format(&path, format!("unsupported layout {:?}", meta.layout)));
    }
    if !(meta.fps > 0.0 && meta.fps.is_finite()) {
        return Err(Error::format(&path, format!("fps must be positive, got {}", meta.fps)));
    }
    if meta.value_range == ValueRange::Signed && meta.dtype == Dtype::U8 {
        return Err(Error::format(&path, "signed clips cannot be stored as u8"));
    }
    Ok(meta)
}

/// Reads a container and reports the dtype it was stored with.
pub fn read_container(dir: &Path) -> Result<(Sample, Dtype)> {
    let meta = read_meta(dir)?;
    let shape = meta.shape();

    let frames_path = dir.join(FRAMES_FILE);
    let raw = read_bytes(&frames_path)?;
    check_size(&frames_path, shape.len() * meta.dtype.size(), raw.len())?;
    let data: Vec<f32> = match meta.dtype {
        Dtype::U8 => raw.iter().map(|&b| b as f32 / 255.0).collect(),
        Dtype::F32 => raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
    };

    let signal_path = dir.join(SIGNAL_FILE);
    let raw = read_bytes(&signal_path)?;
    check_size(&signal_path, meta.frames * 4, raw.len())?;
    let values: Vec<f64> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();

    let clip = VideoClip::new(data, shape, meta.fps)?.with_range(meta.value_range);
    let mut sample = Sample::new(meta.id, clip, SignalTrace::new(values, meta.fps));
    sample.reference_hr = meta.reference_hr;
    Ok((sample, meta.dtype))
}

pub fn read_sample(dir: &Path) -> Result<Sample> {
    read_container(dir).map(|(s, _)| s)
}

pub fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `sample` into `dir`, creating it if needed. The trace is stored
/// as `f32`, so an `f64` trace round-trips only to single precision.
pub fn write_sample(sample: &Sample, dir: &Path, dtype: Dtype) -> Result<()> {
    let shape = sample.clip.shape();
    if sample.trace.len() != shape.frames {
        return Err(Error::input(format!(
            "sample {}: {} frames but {} trace values",
            sample.id,
            shape.frames,
            sample.trace.len()
        )));
    }
    if dtype == Dtype::U8 && sample.clip.range() == ValueRange::Signed {
        return Err(Error::param(format!("sample {}: signed clips need dtype f32", sample.id)));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = SampleMeta {
        schema_version: SCHEMA_VERSION,
        id: sample.id.clone(),
        frames: shape.frames,
        height: shape.height,
        width: shape.width,
        channels: shape.channels,
        fps: sample.clip.fps(),
        dtype,
        layout: LAYOUT.to_string(),
        reference_hr: sample.reference_hr,
        value_range: sample.clip.range(),
    };
    let frames: Vec<u8> = match dtype {
        Dtype::U8 => sample.clip.as_slice().iter().map(|&v| quantize_u8(v)).collect(),
        Dtype::F32 => sample.clip.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect(),
    };
    let signal: Vec<u8> = sample
        .trace
        .values()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    write_bytes(&dir.join(FRAMES_FILE), &frames)?;
    write_bytes(&dir.join(SIGNAL_FILE), &signal)?;
    write_bytes(&dir.join(META_FILE), &json_bytes(&meta))
}

/// Container directories of a dataset, sorted by name. A directory that is
/// itself a container is returned as a one-element dataset.
pub fn list_containers(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(META_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.join(META_FILE).is_file() {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::input(format!("no sample containers under {}", dir.display())));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct HrRow {
    sample_id: String,
    chunk_index: usize,
    bpm: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Writes `sample_id,chunk_index,bpm` rows.
pub fn write_hr_csv(rows: &[ChunkHr], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(HrRow {
            sample_id: r.sample_id.clone(),
            chunk_index: r.chunk_index,
            bpm: r.bpm,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_hr_csv(path: &Path) -> Result<Vec<ChunkHr>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["sample_id", "chunk_index", "bpm"] {
        return Err(Error::format(
            path,
            format!("expected header sample_id,chunk_index,bpm, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    r.deserialize::<HrRow>()
        .map(|row| {
            let row = row.map_err(|e| csv_err(path, e))?;
            if !row.bpm.is_finite() {
                return Err(Error::format(path, format!("non-finite bpm for {}", row.sample_id)));
            }
            Ok(ChunkHr {
                sample_id: row.sample_id,
                chunk_index: row.chunk_index,
                bpm: row.bpm,
            })
        })
        .collect()
}

/// Pairs predictions with references by `(sample_id, chunk_index)`, in
/// reference order. Both files must cover exactly the same keys.
pub fn align_hr(pred: &[ChunkHr], reference: &[ChunkHr]) -> Result<(Vec<f64>, Vec<f64>)> {
    use std::collections::BTreeMap;
    let mut by_key: BTreeMap<(&str, usize), f64> = BTreeMap::new();
    for p in pred {
        if by_key.insert((p.sample_id.as_str(), p.chunk_index), p.bpm).is_some() {
            return Err(Error::input(format!(
                "duplicate prediction for {} chunk {}",
                p.sample_id, p.chunk_index
            )));
        }
    }
    let mut pv = Vec::with_capacity(reference.len());
    let mut rv = Vec::with_capacity(reference.len());
    for r in reference {
        let p = by_key.remove(&(r.sample_id.as_str(), r.chunk_index)).ok_or_else(|| {
            Error::input(format!("no prediction for {} chunk {}", r.sample_id, r.chunk_index))
        })?;
        pv.push(p);
        rv.push(r.bpm);
    }
    if let Some(((id, c), _)) = by_key.into_iter().next() {
        return Err(Error::input(format!("prediction for {id} chunk {c} has no reference")));
    }
    Ok((pv, rv))
}

pub fn write_metrics_json(report: &MetricsReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

/// `metric,value` rows with the same markers as the JSON report.
pub fn write_metrics_csv(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let rows = [
        ("mae", report.mae.to_string()),
        ("rmse", report.rmse.to_string()),
        ("mape", report.mape.to_string()),
        ("pearson", report.pearson.to_string()),
        ("n", report.n.to_string()),
    ];
    w.write_record(["metric", "value"]).map_err(|e| csv_err(path, e))?;
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Square pivot (pairwise) or `op,mae` column (single), 3 decimals.
pub fn write_sweep_pivot(result: &SweepResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let k = result.k();
    match result.mode {
        SweepMode::Single => {
            w.write_record(["op", "mae"]).map_err(|e| csv_err(path, e))?;
            for i in 0..k {
                w.write_record([result.labels[i].clone(), format!("{:.3}", result.get(i, 0))])
                    .map_err(|e| csv_err(path, e))?;
            }
        }
        SweepMode::Pairwise => {
            let header: Vec<String> = std::iter::once("op".to_string()).chain(result.labels.iter().cloned()).collect();
            w.write_record(&header).map_err(|e| csv_err(path, e))?;
            for i in 0..k {
                let row: Vec<String> = std::iter::once(result.labels[i].clone())
                    .chain((0..k).map(|j| format!("{:.3}", result.get(i, j))))
                    .collect();
                w.write_record(&row).map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `row_op,col_op,mae` rows at full precision. Single-mode rows repeat the
/// op in both columns, matching the diagonal of a pairwise table.
pub fn write_sweep_long(result: &SweepResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["row_op", "col_op", "mae"]).map_err(|e| csv_err(path, e))?;
    let k = result.k();
    let cells: Vec<(usize, usize)> = match result.mode {
        SweepMode::Single => (0..k).map(|i| (i, i)).collect(),
        SweepMode::Pairwise => (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect(),
    };
    for (i, j) in cells {
        let v = result.get(i, j);
        w.write_record([result.labels[i].as_str(), result.labels[j].as_str(), &format!("{v:?}")])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a long-form sweep table back as `(row_op, col_op, mae)` triples.
pub fn read_sweep_long(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize::<(String, String, f64)>()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}
