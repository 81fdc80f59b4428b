//! The `pulseaug` command line.
//!
//! Every subcommand reads its inputs, writes results to files and prints
//! diagnostics to standard error. Exit codes: 0 success, 2 bad
//! configuration or arguments, 3 bad data.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pulseaug_core::analysis::{compute_metrics, HrOptions};
use pulseaug_core::config::{AugmentStage, RunConfig, SynthDatasetConfig};
use pulseaug_core::evaluation::{HrPipeline, HrSource};
use pulseaug_core::io::{self, Dtype};
use pulseaug_core::pipeline::{apply_pipeline_at, OpSpec, PipelineSpec, StreamAddress, SweepMode};
use pulseaug_core::preprocess::preprocess_sample;
use pulseaug_core::{Error, Result, Sample};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

const AUGMENTED_SUFFIX: &str = "_aug";

#[derive(Debug, Parser)]
#[command(name = "pulseaug", version, about = "Augment, preprocess and score paired pulse video / PPG samples")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic samples with a known heart rate.
    Synth(SynthArgs),
    /// Apply an augmentation pipeline to every sample of a dataset.
    Augment(AugmentArgs),
    /// Crop, resize, chunk and difference a dataset.
    Preprocess(PreprocessArgs),
    /// Estimate per-chunk heart rates.
    Hr(HrArgs),
    /// Score predicted heart rates against references.
    Eval(EvalArgs),
    /// Run single operators or operator pairs and tabulate MAE.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the pipeline's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Share operator magnitudes across each batch of samples.
    #[arg(long)]
    batch_consistent: bool,
    /// Samples per batch, in dataset order.
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the embedded pipeline's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    augment_stage: Option<String>,
}

#[derive(Debug, Args)]
struct HrArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Filter in one forward pass instead of forward-backward.
    #[arg(long)]
    no_zero_phase: bool,
    #[arg(long, default_value_t = 1)]
    pad_factor: usize,
    #[arg(long, default_value_t = 180)]
    chunk_len: usize,
    /// Read the pulse from the frames (clip) or from the stored label trace.
    #[arg(long, default_value = "clip")]
    source: String,
    /// Also write the reference heart rate of each chunk here.
    #[arg(long)]
    ref_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the metrics as `metric,value` rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    ops: PathBuf,
    #[arg(long, default_value = "single")]
    mode: String,
    #[arg(long)]
    dataset: PathBuf,
    /// Pivot table, 3 decimals.
    #[arg(long)]
    out: PathBuf,
    /// Long-form `row_op,col_op,mae` table; defaults to `<out>_long.csv`.
    #[arg(long)]
    long_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 180)]
    chunk_len: usize,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_config_error() { EXIT_CONFIG } else { EXIT_DATA };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_failure(e: Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: e.to_string(),
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(Failure {
            code: EXIT_CONFIG,
            message: "--threads must be >= 1".into(),
        }),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure {
                code: EXIT_DATA,
                message: format!("cannot start thread pool: {e}"),
            }),
        },
        None => dispatch(cli.command),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("pulseaug: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Augment(a) => augment(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Hr(a) => hr(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    io::load_json(path).map_err(config_failure)
}

fn data_failure(message: String) -> Failure {
    Failure {
        code: EXIT_DATA,
        message,
    }
}

/// Refuses to write into (or below) the directory being read.
fn check_distinct(input: &Path, out: &Path) -> CliResult {
    let input = fs::canonicalize(input).map_err(|e| data_failure(format!("{}: {e}", input.display())))?;
    let mut probe = out.to_path_buf();
    // The output may not exist yet; compare its nearest existing ancestor.
    loop {
        if let Ok(c) = fs::canonicalize(&probe) {
            let resolved = c.join(out.strip_prefix(&probe).unwrap_or(Path::new("")));
            if resolved.starts_with(&input) {
                return Err(Failure {
                    code: EXIT_CONFIG,
                    message: format!("output {} lies inside input {}", out.display(), input.display()),
                });
            }
            return Ok(());
        }
        if !probe.pop() || probe.as_os_str().is_empty() {
            return Ok(());
        }
    }
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| data_failure(format!("cannot create {}: {e}", dir.display())))
}

fn read_dataset(dir: &Path) -> Result<Vec<(Sample, Dtype)>> {
    let paths = io::list_containers(dir)?;
    paths.par_iter().map(|p| io::read_container(p)).collect()
}

fn synth(a: SynthArgs) -> CliResult {
    let cfg: SynthDatasetConfig = load_config(&a.config)?;
    cfg.validate()?;
    if a.count == 0 {
        return Err(config_failure(Error::Param("--count must be >= 1".into())));
    }
    create_dir(&a.out)?;
    (0..a.count).into_par_iter().try_for_each(|i| -> Result<()> {
        let sample = cfg.generate(a.seed, i)?;
        io::write_sample(&sample, &a.out.join(&sample.id), cfg.dtype)
    })?;
    Ok(())
}

fn augment(a: AugmentArgs) -> CliResult {
    let mut spec: PipelineSpec = load_config(&a.pipeline)?;
    if let Some(seed) = a.seed {
        spec.master_seed = seed;
    }
    spec.batch_consistent |= a.batch_consistent;
    spec.validate()?;
    if a.batch_size == 0 {
        return Err(config_failure(Error::Param("--batch-size must be >= 1".into())));
    }
    check_distinct(&a.input, &a.out)?;
    let data = read_dataset(&a.input)?;
    create_dir(&a.out)?;
    data.par_iter().enumerate().try_for_each(|(i, (sample, dtype))| -> Result<()> {
        let at = StreamAddress {
            stage: pulseaug_core::pipeline::AUGMENT_STAGE,
            sample_index: i as u64,
            batch_index: (i / a.batch_size) as u64,
        };
        let mut out = apply_pipeline_at(sample, &spec, at)?;
        out.id = format!("{}{AUGMENTED_SUFFIX}", sample.id);
        io::write_sample(&out, &a.out.join(&out.id), *dtype)
    })?;
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> CliResult {
    let mut cfg: RunConfig = load_config(&a.config)?;
    if let Some(stage) = &a.augment_stage {
        cfg.augment_stage = stage.parse().map_err(config_failure)?;
    }
    if let (Some(seed), Some(p)) = (a.seed, cfg.pipeline.as_mut()) {
        p.master_seed = seed;
    }
    cfg.validate().map_err(config_failure)?;
    let input = a
        .input
        .or(cfg.paths.input.clone())
        .ok_or_else(|| config_failure(Error::Config("no input directory (--in or paths.input)".into())))?;
    let out = a
        .out
        .or(cfg.paths.output.clone())
        .ok_or_else(|| config_failure(Error::Config("no output directory (--out or paths.output)".into())))?;
    check_distinct(&input, &out)?;
    let data = read_dataset(&input)?;
    create_dir(&out)?;
    data.par_iter().enumerate().try_for_each(|(i, (sample, _))| -> Result<()> {
        let augment = |s: &Sample, stage: &str| -> Result<Sample> {
            match &cfg.pipeline {
                Some(spec) => apply_pipeline_at(
                    s,
                    spec,
                    StreamAddress {
                        stage,
                        sample_index: i as u64,
                        batch_index: 0,
                    },
                ),
                None => Ok(s.clone()),
            }
        };
        let chunks = match cfg.augment_stage {
            AugmentStage::Raw => preprocess_sample(&augment(sample, "augment")?, &cfg.preprocess)?,
            AugmentStage::Diff => preprocess_sample(sample, &cfg.preprocess)?
                .iter()
                .enumerate()
                .map(|(j, c)| augment(c, &format!("augment-chunk-{j}")))
                .collect::<Result<_>>()?,
        };
        for c in &chunks {
            io::write_sample(c, &out.join(&c.id), Dtype::F32)?;
        }
        Ok(())
    })?;
    Ok(())
}

fn hr(a: HrArgs) -> CliResult {
    let source: HrSource = a.source.parse().map_err(config_failure)?;
    let mut pipeline = HrPipeline {
        source,
        hr: HrOptions {
            pad_factor: a.pad_factor,
            ..HrOptions::default()
        },
        chunk_len: Some(a.chunk_len),
        ..HrPipeline::default()
    };
    pipeline.filter.zero_phase = !a.no_zero_phase;
    if a.pad_factor == 0 || a.chunk_len < 2 {
        return Err(config_failure(Error::Param(
            "--pad-factor must be >= 1 and --chunk-len >= 2".into(),
        )));
    }
    let data = read_dataset(&a.input)?;
    let per_sample: Vec<_> = data
        .par_iter()
        .map(|(s, _)| pipeline.estimate(s))
        .collect::<Result<_>>()?;
    let rows: Vec<_> = per_sample.into_iter().flatten().collect();
    io::write_hr_csv(&rows, &a.out)?;
    if let Some(path) = &a.ref_out {
        let refs: Vec<_> = data
            .iter()
            .map(|(s, _)| pipeline.reference(s))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        io::write_hr_csv(&refs, path)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let pred = io::read_hr_csv(&a.pred)?;
    let reference = io::read_hr_csv(&a.reference)?;
    let (p, r) = io::align_hr(&pred, &reference)?;
    let report = compute_metrics(&p, &r)?;
    io::write_metrics_json(&report, &a.out)?;
    if let Some(path) = &a.csv {
        io::write_metrics_csv(&report, path)?;
    }
    Ok(())
}

/// Either a bare list of operators or `{"ops": [...]}`.
#[derive(serde::Deserialize)]
#[serde(untagged)]
enum OpsFile {
    List(Vec<OpSpec>),
    Wrapped {
        ops: Vec<OpSpec>,
    },
}

fn sweep(a: SweepArgs) -> CliResult {
    let ops = match load_config::<OpsFile>(&a.ops)? {
        OpsFile::List(ops) | OpsFile::Wrapped { ops } => ops,
    };
    let mode: SweepMode = a.mode.parse().map_err(config_failure)?;
    if a.chunk_len < 2 {
        return Err(config_failure(Error::Param("--chunk-len must be >= 2".into())));
    }
    for op in &ops {
        op.resolve()?;
    }
    let data: Vec<Sample> = read_dataset(&a.dataset)?.into_iter().map(|(s, _)| s).collect();
    let evaluator = HrPipeline {
        chunk_len: Some(a.chunk_len),
        ..HrPipeline::default()
    };
    let result = pulseaug_core::sweep(&data, &ops, mode, a.seed, &evaluator)?;
    io::write_sweep_pivot(&result, &a.out)?;
    let long = a.long_out.unwrap_or_else(|| long_path(&a.out));
    io::write_sweep_long(&result, &long)?;
    Ok(())
}

/// `dir/matrix.csv` → `dir/matrix_long.csv`.
pub fn long_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_long.csv"))
}
