//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use pulseaug_core::analysis::{butterworth_bandpass, compute_metrics, FilterConfig};
use pulseaug_core::io;
use pulseaug_core::pipeline::{apply_pipeline, proposed_pipeline_spec};
use pulseaug_core::rng::derive_rng;
use pulseaug_core::signal_ops::add_gaussian_noise;
use pulseaug_core::synthgen::{generate_sample, SynthConfig};
use pulseaug_core::video_ops::{apply_geometric, Axis, GeometricOp, PoissonGaussian};
use pulseaug_core::{ClipShape, HrPipeline, SignalTrace, VideoClip};

type Check = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn all_ops() -> Vec<GeometricOp> {
    vec![
        GeometricOp::Rotate { theta: 0.3 },
        GeometricOp::Translate { axis: Axis::X, m: 4.5 },
        GeometricOp::Translate { axis: Axis::Y, m: -3.25 },
        GeometricOp::Shear { axis: Axis::X, m: 0.15 },
        GeometricOp::Shear { axis: Axis::Y, m: -0.2 },
        GeometricOp::Flip,
    ]
}

/// Hand-written table of transformed coordinates.
fn table(op: &GeometricOp, x: f64, y: f64, a: f64) -> (f64, f64) {
    match *op {
        GeometricOp::Rotate { theta } => (x * theta.cos() - y * theta.sin(), x * theta.sin() + y * theta.cos()),
        GeometricOp::Translate { axis: Axis::X, m } => (x + m, y),
        GeometricOp::Translate { axis: Axis::Y, m } => (x, y + m),
        GeometricOp::Shear { axis: Axis::X, m } => (x + m * y, y),
        GeometricOp::Shear { axis: Axis::Y, m } => (x, m * x + y),
        GeometricOp::Flip => (a - x, y),
    }
}

fn textured(frames: usize, side: usize, seed: u64) -> VideoClip {
    let mut r = derive_rng(seed, "acceptance-texture", 0, 0);
    let shape = ClipShape::new(frames, side, side, 3);
    VideoClip::new((0..shape.len()).map(|_| r.random::<f32>()).collect(), shape, 30.0).unwrap()
}

fn coordinate_conformance() -> Check {
    let mut r = derive_rng(11, "acceptance-coords", 0, 0);
    let a = 71.0;
    let mut worst = 0.0f64;
    for op in all_ops() {
        for _ in 0..20 {
            let (x, y) = (r.random_range(-50.0..120.0), r.random_range(-50.0..120.0));
            let got = op.map_coords(x, y, a);
            let want = table(&op, x, y, a);
            let err = (got.0 - want.0).abs().max((got.1 - want.1).abs());
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("{op:?} at ({x}, {y}): {got:?} vs {want:?}"))?;
        }
    }
    // The warp samples the source at the inverse-mapped position; on a
    // linear ramp bilinear sampling is exact, so interior pixels must equal
    // the ramp at the table coordinate.
    let side = 48;
    let ramp = |x: f64, y: f64| 0.2 + 0.004 * x + 0.007 * y;
    let shape = ClipShape::new(1, side, side, 1);
    let data: Vec<f32> = (0..side * side).map(|i| ramp((i % side) as f64, (i / side) as f64) as f32).collect();
    let clip = VideoClip::new(data, shape, 30.0).unwrap();
    let c = (side as f64 - 1.0) / 2.0;
    for op in all_ops() {
        let out = apply_geometric(&clip, op, 0.0);
        for y in 12..36 {
            for x in 12..36 {
                let (sx, sy) = match op {
                    GeometricOp::Rotate { .. } | GeometricOp::Shear { .. } => {
                        let (u, v) = table(&op.inverse(), x as f64 - c, y as f64 - c, 0.0);
                        (u + c, v + c)
                    }
                    _ => table(&op.inverse(), x as f64, y as f64, side as f64 - 1.0),
                };
                let got = out.get(0, y, x, 0) as f64;
                ensure((got - ramp(sx, sy)).abs() < 1e-5, || {
                    format!("{op:?} pixel ({x}, {y}) = {got}, table says {}", ramp(sx, sy))
                })?;
            }
        }
    }
    let clip = textured(3, 20, 1);
    for op in [
        GeometricOp::Rotate { theta: 0.0 },
        GeometricOp::Translate { axis: Axis::X, m: 0.0 },
        GeometricOp::Translate { axis: Axis::Y, m: 0.0 },
        GeometricOp::Shear { axis: Axis::X, m: 0.0 },
        GeometricOp::Shear { axis: Axis::Y, m: 0.0 },
    ] {
        ensure(apply_geometric(&clip, op, 0.0) == clip, || format!("{op:?} is not an identity"))?;
    }
    Ok(format!("120 coordinates, max error {worst:.1e}; identity warps bit-exact"))
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (slope, intercept, 1.0 - ss_res / ss_tot)
}

fn variance(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

fn noise_statistics() -> Check {
    let (s, c) = (0.01, 0.0004);
    let model = PoissonGaussian::new(s, c).map_err(|e| e.to_string())?;
    let levels: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let vars: Vec<f64> = levels
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut r = derive_rng(5, "acceptance-camera", i as u64, 0);
            variance((0..1_000_000).map(|_| model.perturb(x, &mut r) - x))
        })
        .collect();
    let (slope, intercept, r2) = linear_fit(&levels, &vars);
    ensure(r2 > 0.99, || format!("R² {r2}"))?;
    ensure((slope - s).abs() < 0.05 * s, || format!("slope {slope} vs {s}"))?;
    ensure((intercept - c).abs() < 0.05 * c + 0.02 * s, || format!("intercept {intercept} vs {c}"))?;

    let trace = SignalTrace::new(vec![0.0; 100_000], 30.0);
    let noisy = add_gaussian_noise(&trace, 0.5, &mut derive_rng(5, "acceptance-awgn", 0, 0)).map_err(|e| e.to_string())?;
    let v = variance(noisy.values().iter().copied());
    ensure((v - 0.5).abs() < 0.04 * 0.5, || format!("Gaussian variance {v}"))?;
    Ok(format!(
        "slope {slope:.5} (σs² {s}), intercept {intercept:.6} (σc² {c}), R² {r2:.5}; AWGN variance {v:.4}"
    ))
}

fn sine_trace(freq: f64, seconds: f64, fps: f64) -> SignalTrace {
    let n = (seconds * fps) as usize;
    SignalTrace::new(
        (0..n).map(|t| (2.0 * std::f64::consts::PI * freq * t as f64 / fps).sin()).collect(),
        fps,
    )
}

fn filter_conformance() -> Check {
    let cfg = FilterConfig::default();
    let amp = |f: f64| -> Result<f64, String> {
        let out = butterworth_bandpass(&sine_trace(f, 30.0, 30.0), &cfg).map_err(|e| e.to_string())?;
        let v = out.values();
        let (a, b) = (v.len() / 4, 3 * v.len() / 4);
        Ok(v[a..b].iter().fold(0.0f64, |m, x| m.max(x.abs())))
    };
    let (pass, low, high) = (amp(1.5)?, amp(0.2)?, amp(5.0)?);
    ensure((pass - 1.0).abs() <= 0.05, || format!("1.5 Hz amplitude {pass}"))?;
    ensure(low < 0.1, || format!("0.2 Hz amplitude {low}"))?;
    ensure(high < 0.1, || format!("5 Hz amplitude {high}"))?;
    Ok(format!("1.5 Hz → {pass:.4}, 0.2 Hz → {low:.4}, 5 Hz → {high:.4}"))
}

fn synth60(hr: f64) -> pulseaug_core::Sample {
    let cfg = SynthConfig {
        hr_bpm: hr,
        duration_s: 60.0,
        ..SynthConfig::default()
    };
    generate_sample("accept", &cfg, &derive_rng(0, "acceptance-synth", hr as u64, 0)).unwrap()
}

fn exact_recovery() -> Check {
    let hr = HrPipeline::whole_trace();
    let mut got = Vec::new();
    for target in [60.0, 90.0, 120.0] {
        let est = hr.estimate(&synth60(target)).map_err(|e| e.to_string())?;
        ensure(est.len() == 1 && est[0].bpm == target, || format!("{target} bpm → {:?}", est))?;
        got.push(est[0].bpm);
    }
    Ok(format!("recovered {got:?}"))
}

fn augmentation_robustness() -> Check {
    let sample = synth60(90.0);
    let hr = HrPipeline::whole_trace();
    let mut got = Vec::new();
    for seed in 0..10u64 {
        let spec = proposed_pipeline_spec(seed).with_all_probs(1.0);
        let out = apply_pipeline(&sample, &spec, 0).map_err(|e| e.to_string())?;
        let bpm = hr.estimate(&out).map_err(|e| e.to_string())?[0].bpm;
        ensure((bpm - 90.0).abs() <= 1.0, || format!("seed {seed}: {bpm} bpm"))?;
        got.push(bpm);
    }
    Ok(format!("10 seeds → {got:?}"))
}

fn ordering_semantics() -> Check {
    let clip = textured(2, 64, 3);
    let tx = GeometricOp::Translate { axis: Axis::X, m: 5.0 };
    let ty = GeometricOp::Translate { axis: Axis::Y, m: -7.0 };
    let xy = apply_geometric(&apply_geometric(&clip, tx, 0.0), ty, 0.0);
    let yx = apply_geometric(&apply_geometric(&clip, ty, 0.0), tx, 0.0);
    ensure(xy == yx, || "translate X∘Y differs from Y∘X".into())?;

    // A smooth pattern so differences come from geometry, not aliasing.
    let side = 64;
    let shape = ClipShape::new(1, side, side, 1);
    let data: Vec<f32> = (0..side * side)
        .map(|i| {
            let (x, y) = ((i % side) as f32, (i / side) as f32);
            0.5 + 0.25 * (x / 5.0).sin() + 0.2 * (y / 7.0).cos()
        })
        .collect();
    let smooth = VideoClip::new(data, shape, 30.0).unwrap();
    let rot = GeometricOp::Rotate { theta: 10f64.to_radians() };
    let tr = GeometricOp::Translate { axis: Axis::X, m: 5.0 };
    let a = apply_geometric(&apply_geometric(&smooth, tr, 0.0), rot, 0.0);
    let b = apply_geometric(&apply_geometric(&smooth, rot, 0.0), tr, 0.0);
    let margin = 12;
    let (mut differ, mut total) = (0usize, 0usize);
    for y in margin..side - margin {
        for x in margin..side - margin {
            total += 1;
            if (a.get(0, y, x, 0) - b.get(0, y, x, 0)).abs() > 1.0 / 255.0 {
                differ += 1;
            }
        }
    }
    let frac = differ as f64 / total as f64;
    ensure(frac > 0.01, || format!("only {:.2}% of interior pixels differ", 100.0 * frac))?;
    Ok(format!(
        "translations commute bit-exactly; rotate/translate differ on {:.1}% of interior pixels",
        100.0 * frac
    ))
}

fn metrics_oracle() -> Check {
    // (pred, ref, mae, rmse, mape, pearson) from an independent numpy/scipy run.
    let cases: [(&[f64], &[f64], [f64; 4]); 5] = [
        (&[72.0, 75.0, 80.0], &[70.0, 80.0, 80.0], [2.3333333333333335, 3.1091263510296048, 3.0357142857142856, 0.785714285714286]),
        (&[60.0, 65.0, 70.0, 75.0, 80.0], &[62.0, 64.0, 71.0, 77.0, 79.0], [1.4, 1.4832396974191326, 2.011996507610196, 0.9817265838892386]),
        (&[88.5, 91.25, 102.0, 110.75], &[90.0, 90.0, 100.0, 115.0], [2.25, 2.5433737436719754, 2.1878019323671496, 0.9767981754681718]),
        (&[55.0, 120.0, 73.0, 98.0, 140.0, 66.0], &[58.0, 115.0, 70.0, 101.0, 133.0, 70.0], [4.166666666666667, 4.415880433163924, 4.625615800749963, 0.9949752149725872]),
        (&[100.0, 100.0, 100.0, 101.0], &[95.0, 105.0, 98.0, 104.0], [3.75, 3.968626966596886, 3.7376235919469, 0.4865336327998411]),
    ];
    for (i, (p, r, want)) in cases.iter().enumerate() {
        let m = compute_metrics(p, r).map_err(|e| e.to_string())?;
        let got = [m.mae.0, m.rmse.0, m.mape.0, m.pearson.0];
        for (g, w) in got.iter().zip(want) {
            let g = g.ok_or_else(|| format!("case {i}: undefined metric"))?;
            ensure((g - w).abs() <= 1e-9, || format!("case {i}: {g} vs {w}"))?;
        }
    }
    let mut r = derive_rng(9, "acceptance-metrics", 0, 0);
    for k in 0..1000 {
        let n = r.random_range(1..40);
        let p: Vec<f64> = (0..n).map(|_| r.random_range(40.0..160.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| r.random_range(40.0..160.0)).collect();
        let m = compute_metrics(&p, &q).map_err(|e| e.to_string())?;
        let (mae, rmse) = (m.mae.0.unwrap(), m.rmse.0.unwrap());
        ensure(mae <= rmse * (1.0 + 1e-12), || format!("pair {k}: MAE {mae} > RMSE {rmse}"))?;
    }
    Ok("5 fixed cases within 1e-9; MAE ≤ RMSE on 1000 random pairs".into())
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pulseaug")
}

fn pulseaug(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "pulseaug {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| e.to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative path → file bytes for every file under `root`.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn cli_run(root: &Path, cfg: &Path, pipe: &Path, threads: Option<&str>) -> Result<(), String> {
    std::fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let with_threads = |args: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        if let Some(t) = threads {
            v.push("--threads".into());
            v.push(t.into());
        }
        v
    };
    let run = |args: &[&str]| -> Result<(), String> {
        let owned = with_threads(args);
        pulseaug(&owned.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let (raw, aug) = (root.join("raw"), root.join("aug"));
    let (hr, reference, metrics) = (root.join("hr.csv"), root.join("ref.csv"), root.join("metrics.json"));
    run(&["synth", "--config", s(cfg), "--out", s(&raw), "--count", "6", "--seed", "42"])?;
    run(&["augment", "--pipeline", s(pipe), "--in", s(&raw), "--out", s(&aug), "--seed", "42"])?;
    run(&["hr", "--in", s(&aug), "--out", s(&hr), "--ref-out", s(&reference)])?;
    run(&["eval", "--pred", s(&hr), "--ref", s(&reference), "--out", s(&metrics)])
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("synth.json");
    let pipe = dir.path().join("pipeline.json");
    write(&cfg, r#"{"sample": {"duration_s": 12, "size": 36, "sensor_noise": [0.0004, 0.0004]}, "hr_bpm_range": [55, 130]}"#)?;
    let spec = serde_json::to_string(&proposed_pipeline_spec(0)).unwrap();
    write(&pipe, &spec)?;
    let max = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4).max(4).to_string();
    cli_run(&dir.path().join("a"), &cfg, &pipe, Some("1"))?;
    cli_run(&dir.path().join("b"), &cfg, &pipe, Some(&max))?;
    cli_run(&dir.path().join("c"), &cfg, &pipe, None)?;
    let a = tree(&dir.path().join("a"));
    ensure(a.len() == 6 * 3 * 2 + 3, || format!("unexpected file count {}", a.len()))?;
    for other in ["b", "c"] {
        let t = tree(&dir.path().join(other));
        ensure(t == a, || format!("output tree {other} differs from the single-thread run"))?;
    }
    Ok(format!("{} files identical across threads=1, threads={max} and default", a.len()))
}

fn sweep_harness() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("synth.json");
    write(&cfg, r#"{"sample": {"duration_s": 12, "size": 36}, "hr_bpm_range": [50, 140]}"#)?;
    let data = dir.path().join("data");
    pulseaug(&["synth", "--config", s(&cfg), "--out", s(&data), "--count", "20", "--seed", "3"])?;
    let ops = dir.path().join("ops.json");
    write(
        &ops,
        r#"[{"name": "camera_noise"}, {"name": "shear_x"}, {"name": "gaussian_noise"}, {"name": "baseline_wander"}]"#,
    )?;
    let (pair, single) = (dir.path().join("pair.csv"), dir.path().join("single.csv"));
    pulseaug(&["sweep", "--ops", s(&ops), "--mode", "pairwise", "--dataset", s(&data), "--out", s(&pair), "--seed", "8"])?;
    pulseaug(&["sweep", "--ops", s(&ops), "--mode", "single", "--dataset", s(&data), "--out", s(&single), "--seed", "8"])?;

    let pivot = std::fs::read_to_string(&pair).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<&str>> = pivot.lines().map(|l| l.split(',').collect()).collect();
    ensure(rows.len() == 5 && rows.iter().all(|r| r.len() == 5), || format!("pivot is not 4×4:\n{pivot}"))?;
    ensure(rows[0][1..] == ["camera_noise", "shear_x", "gaussian_noise", "baseline_wander"], || {
        format!("header {:?}", rows[0])
    })?;

    let long = io::read_sweep_long(&pulseaug_cli::long_path(&pair)).map_err(|e| e.to_string())?;
    let single_long = io::read_sweep_long(&pulseaug_cli::long_path(&single)).map_err(|e| e.to_string())?;
    ensure(long.len() == 16 && single_long.len() == 4, || "long-form sizes".into())?;
    let mut worst = 0.0f64;
    for (op, _, v) in &single_long {
        let d = long
            .iter()
            .find(|(r, c, _)| r == op && c == op)
            .ok_or_else(|| format!("no diagonal for {op}"))?
            .2;
        worst = worst.max((d - v).abs());
        ensure((d - v).abs() <= 1e-9, || format!("{op}: diagonal {d} vs single {v}"))?;
    }
    let diag: Vec<String> = single_long.iter().map(|(op, _, v)| format!("{op}={v:.3}")).collect();
    Ok(format!("4×4 pivot; diagonal matches single (max diff {worst:.1e}); {}", diag.join(", ")))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "coordinate-table conformance", budget: Duration::from_secs(1), run: coordinate_conformance },
        Criterion { id: 2, name: "noise statistics", budget: Duration::from_secs(10), run: noise_statistics },
        Criterion { id: 3, name: "band-pass filter conformance", budget: Duration::from_secs(1), run: filter_conformance },
        Criterion { id: 4, name: "exact HR recovery", budget: Duration::from_secs(5), run: exact_recovery },
        Criterion { id: 5, name: "augmentation-robust HR", budget: Duration::from_secs(60), run: augmentation_robustness },
        Criterion { id: 6, name: "ordering semantics", budget: Duration::from_secs(1), run: ordering_semantics },
        Criterion { id: 7, name: "metrics oracle", budget: Duration::from_secs(1), run: metrics_oracle },
        Criterion { id: 8, name: "CLI determinism", budget: Duration::from_secs(60), run: cli_determinism },
        Criterion { id: 9, name: "sweep harness", budget: Duration::from_secs(300), run: sweep_harness },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let over = took > c.budget;
        match (&outcome, over) {
            (Ok(detail), false) => println!("PASS [{}] {} ({:.2?}): {detail}", c.id, c.name, took),
            (Ok(detail), true) => {
                failed += 1;
                println!("FAIL [{}] {} ({:.2?} > {:?} budget): {detail}", c.id, c.name, took, c.budget)
            }
            (Err(why), _) => {
                failed += 1;
                println!("FAIL [{}] {} ({:.2?}): {why}", c.id, c.name, took)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
