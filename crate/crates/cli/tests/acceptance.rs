//! Acceptance suite: one line per criterion, `[PASS]` or `[FAIL]`, with the
//! measured value and runtime. Exits non-zero if any criterion fails.
//!
//! Every expected value is recomputed here by an oracle that shares no code
//! with the library.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use racecrt::evaluation::{make_fold_plan, make_stratified_fold_plan, EvalReport};
use racecrt::inference::{fuse, FootageEmbedding, Fusion, InstanceName, InstanceSpec};
use racecrt::preprocess::plan_clips;
use racecrt::regression::{fit_normalization_from, knn_fit, knn_predict, normalize_crt, Metric, Weighting};
use racecrt::{mae, CrtSeconds, NormalizationParams, NormalizedCrt, RecordingPointId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let ok = outcome.ok && in_time;
    let timing = if in_time {
        format!("{:.2}s", elapsed.as_secs_f64())
    } else {
        format!("{:.2}s, over the {}s limit", elapsed.as_secs_f64(), limit.as_secs())
    };
    println!("[{}] {name}: {} ({timing})", if ok { "PASS" } else { "FAIL" }, outcome.detail);
    ok
}

fn oracle_distance(metric: Metric, a: &[f32], b: &[f32]) -> f64 {
    let xs: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let ys: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    match metric {
        Metric::Euclidean => {
            let mut s = 0.0;
            for i in 0..xs.len() {
                s += (xs[i] - ys[i]) * (xs[i] - ys[i]);
            }
            s.sqrt()
        }
        Metric::Manhattan => {
            let mut s = 0.0;
            for i in 0..xs.len() {
                s += (xs[i] - ys[i]).abs();
            }
            s
        }
        Metric::Cosine => {
            let dot: f64 = (0..xs.len()).map(|i| xs[i] * ys[i]).sum();
            let na = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = ys.iter().map(|v| v * v).sum::<f64>().sqrt();
            1.0 - dot / (na * nb)
        }
    }
}

/// Sorts every training row by distance and averages the first `k`.
fn oracle_predict(
    rows: &[Vec<f32>],
    ys: &[f64],
    query: &[f32],
    k: usize,
    metric: Metric,
    weighting: Weighting,
) -> f64 {
    let mut all: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (oracle_distance(metric, r, query), i)).collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let nearest = &all[..k];
    match weighting {
        Weighting::Uniform => nearest.iter().map(|&(_, i)| ys[i]).sum::<f64>() / k as f64,
        Weighting::InverseDistance => {
            let w: Vec<f64> = nearest.iter().map(|&(d, _)| 1.0 / d).collect();
            let num: f64 = nearest.iter().zip(&w).map(|(&(_, i), w)| w * ys[i]).sum();
            num / w.iter().sum::<f64>()
        }
    }
}

fn knn_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for case in 0..1000 {
        let n = rng.gen_range(5..=200);
        let dim = if case % 2 == 0 { 2 } else { 192 };
        let k = [1, 3, 5][rng.gen_range(0..3)];
        let metric = Metric::ALL[rng.gen_range(0..3)];
        let weighting = Weighting::ALL[rng.gen_range(0..2)];
        let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let query: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let targets: Vec<NormalizedCrt> = ys.iter().map(|&y| NormalizedCrt(y)).collect();
        let model = knn_fit(&rows, &targets, k, metric, weighting).unwrap();
        let got = knn_predict(&model, &query).unwrap().value();
        let want = oracle_predict(&rows, &ys, &query, k, metric, weighting);
        let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if rel > 1e-12 {
            failures += 1;
        }
    }
    Outcome {
        ok: failures == 0,
        detail: format!("1000 cases, {failures} over 1e-12, worst relative error {worst:.2e}"),
    }
}

fn mae_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut total = 0.0;
    for i in 0..100 {
        total += if a[i] > b[i] { a[i] - b[i] } else { b[i] - a[i] };
    }
    let want = total / 100.0;
    let got = mae(&a, &b).unwrap();
    let err = (got - want).abs();
    Outcome {
        ok: err <= 1e-12,
        detail: format!("100 pairs, |mae - oracle| = {err:.2e}"),
    }
}

fn normalization_spot_values() -> Outcome {
    let params = NormalizationParams::new(28_800.0, 72_000.0).unwrap();
    let spot = normalize_crt(CrtSeconds::new(43_200.0).unwrap(), &params).value();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad_sets = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..60);
        let crts: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..90_000.0f64).round()).collect();
        let rps: Vec<u32> = (0..n).map(|i| (i % 3) as u32).collect();
        let samples = crts.iter().zip(&rps).map(|(&c, &r)| (RecordingPointId(r), CrtSeconds::new(c).unwrap()));
        let p = fit_normalization_from(samples).unwrap();
        let min_start = crts.iter().zip(&rps).filter(|(_, &r)| r == 0).map(|(&c, _)| c).fold(f64::INFINITY, f64::min);
        let max = crts.iter().copied().fold(0.0, f64::max);
        let norm: Vec<f64> = crts.iter().map(|&c| normalize_crt(CrtSeconds::new(c).unwrap(), &p).value()).collect();
        let affine = crts.iter().zip(&norm).all(|(&c, &v)| (v - (c - min_start) / max).abs() <= 1e-15);
        let arg = |xs: &[f64], best: fn(f64, f64) -> bool| {
            let mut i0 = 0;
            for i in 1..xs.len() {
                if best(xs[i], xs[i0]) {
                    i0 = i;
                }
            }
            i0
        };
        let order_kept = arg(&crts, |a, b| a > b) == arg(&norm, |a, b| a > b) && arg(&crts, |a, b| a < b) == arg(&norm, |a, b| a < b);
        if !(affine && order_kept) {
            bad_sets += 1;
        }
    }
    Outcome {
        ok: spot == 0.2 && bad_sets == 0,
        detail: format!("normalize(43200) = {spot}, {bad_sets}/1000 sets break affinity or argmax"),
    }
}

fn clip_plan_arithmetic() -> Outcome {
    let expected = [(InstanceName::XS, 3), (InstanceName::S, 3), (InstanceName::M, 2), (InstanceName::L, 2)];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, clips) in expected {
        let spec = InstanceSpec::new(name, 182);
        let plan = plan_clips(175, &spec).unwrap();
        let (q, sr) = match name {
            InstanceName::XS | InstanceName::S => (4, 12),
            InstanceName::M => (13, 6),
            InstanceName::L => (16, 5),
        };
        let mut oracle = Vec::new();
        let mut start = 0;
        while start + q * sr <= 175 {
            oracle.push((0..q).map(|i| start + i * sr).collect::<Vec<_>>());
            start += q * sr;
        }
        let planned: Vec<Vec<usize>> = (0..plan.len()).map(|c| plan.indices(c).unwrap()).collect();
        ok &= plan.len() == clips && planned == oracle;
        notes.push(format!("{name}={}", plan.len()));
    }
    Outcome {
        ok,
        detail: format!("175 frames: {}", notes.join(" ")),
    }
}

fn fold_protocol() -> Outcome {
    let strata: Vec<u32> = (0..456).map(|i| (i % 3) as u32).collect();
    let plans = [
        make_stratified_fold_plan(&strata, 20, 10, 1).unwrap(),
        make_fold_plan(456, 20, 10, 1).unwrap(),
    ];
    let mut ok = true;
    let mut sizes = std::collections::BTreeSet::new();
    let mut train_total = 0usize;
    let mut folds_seen = 0usize;
    for plan in &plans {
        for r in 0..20 {
            let mut hits = vec![0; 456];
            for f in 0..10 {
                let test = plan.test_indices(r, f);
                let train = plan.train_indices(r, f);
                sizes.insert(test.len());
                train_total += train.len();
                folds_seen += 1;
                for i in test {
                    hits[i] += 1;
                }
            }
            ok &= hits.iter().all(|&h| h == 1);
        }
    }
    let mean_train = train_total as f64 / folds_seen as f64;
    ok &= sizes.iter().all(|s| *s == 45 || *s == 46) && (410.0..=411.0).contains(&mean_train);
    Outcome {
        ok,
        detail: format!("test sizes {sizes:?}, mean train size {mean_train:.1}, partitions hold: {ok}"),
    }
}

fn fusion_shape_law() -> Outcome {
    let one = |name| FootageEmbedding {
        values: vec![0.25; 192],
        provenance: vec![name],
        fusion: Fusion::Single,
    };
    let mut notes = Vec::new();
    let mut ok = true;
    for count in 2..=4 {
        let inputs: Vec<_> = InstanceName::ALL[..count].iter().map(|&n| one(n)).collect();
        let cat = fuse(&inputs, Fusion::Concat).unwrap().values.len();
        let avg = fuse(&inputs, Fusion::Average).unwrap().values.len();
        ok &= cat == 192 * count && avg == 192;
        notes.push(format!("#I={count}: concat {cat}, average {avg}"));
    }
    Outcome {
        ok,
        detail: notes.join("; "),
    }
}

fn racecrt(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_racecrt"))
        .args(args)
        .arg("--quiet")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("racecrt {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn synth_and_evaluate(dir: &Path, extra: &[&str]) -> Result<EvalReport, String> {
    let out = dir.to_str().unwrap();
    let mut synth = vec!["synth", "--out", out, "--seed", "17"];
    synth.extend_from_slice(extra);
    racecrt(&synth)?;
    racecrt(&["evaluate", "--out", out, "--seed", "17"])?;
    let text = std::fs::read_to_string(dir.join("report_XS.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn synthetic_recoverability() -> Outcome {
    let exact = tempfile::tempdir().unwrap();
    let noisy = tempfile::tempdir().unwrap();
    let r0 = synth_and_evaluate(exact.path(), &["--family", "linear", "--sigma", "0"]);
    let r1 = synth_and_evaluate(noisy.path(), &["--family", "linear", "--sigma", "0.01"]);
    match (r0, r1) {
        (Ok(a), Ok(b)) => Outcome {
            ok: a.observations == 456 && a.mean_mae < 1e-3 && b.mean_mae > 0.0 && b.mean_mae <= 0.02,
            detail: format!(
                "{} observations; sigma 0: MAE {:.6} (< 1e-3); sigma 0.01: MAE {:.6} (in (0, 0.02])",
                a.observations, a.mean_mae, b.mean_mae
            ),
        },
        (a, b) => Outcome {
            ok: false,
            detail: format!("{:?} / {:?}", a.err(), b.err()),
        },
    }
}

/// Mean absolute deviation of the normalized targets, from the manifest alone.
fn closed_form_mad(manifest_path: &Path) -> f64 {
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest_path).unwrap()).unwrap();
    let start = m["race_start"].as_f64().unwrap();
    let obs = m["observations"].as_array().unwrap();
    let crts: Vec<(u64, f64)> = obs
        .iter()
        .map(|o| (o["rp"].as_u64().unwrap(), o["passing_time"].as_f64().unwrap() - start))
        .collect();
    let min_start = crts.iter().filter(|(rp, _)| *rp == 0).map(|c| c.1).fold(f64::INFINITY, f64::min);
    let max = crts.iter().map(|c| c.1).fold(0.0, f64::max);
    let ys: Vec<f64> = crts.iter().map(|c| (c.1 - min_start) / max).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - mean).abs()).sum::<f64>() / ys.len() as f64
}

fn null_signal_control() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    match synth_and_evaluate(dir.path(), &["--family", "constant", "--sigma", "0"]) {
        Ok(report) => {
            let mad = closed_form_mad(&dir.path().join("manifest.json"));
            let rel = (report.mean_mae - mad).abs() / mad;
            Outcome {
                ok: rel <= 0.05,
                detail: format!(
                    "MAE {:.5} vs mean absolute deviation {:.5}, relative gap {:.2}%",
                    report.mean_mae,
                    mad,
                    rel * 100.0
                ),
            }
        }
        Err(e) => Outcome { ok: false, detail: e },
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = || -> Result<(Vec<u8>, String), String> {
        let table = racecrt(&["evaluate", "--out", out, "--seed", "5", "--format", "csv"])?;
        let json = std::fs::read(dir.path().join("report_XS.json")).map_err(|e| e.to_string())?;
        Ok((json, table))
    };
    let result = racecrt(&["synth", "--out", out, "--seed", "5", "--sigma", "0.02", "--family", "sinusoidal"])
        .and_then(|_| Ok((run()?, run()?)));
    match result {
        Ok((a, b)) => Outcome {
            ok: a == b,
            detail: format!("report files {} bytes, identical: {}", a.0.len(), a == b),
        },
        Err(e) => Outcome { ok: false, detail: e },
    }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        check("k-NN oracle equivalence", secs(10), knn_oracle_equivalence),
        check("MAE arithmetic", secs(1), mae_arithmetic),
        check("CRT normalization spot values", secs(1), normalization_spot_values),
        check("clip-plan arithmetic", secs(1), clip_plan_arithmetic),
        check("fold protocol", secs(1), fold_protocol),
        check("end-to-end synthetic recoverability", secs(120), synthetic_recoverability),
        check("null-signal control", secs(120), null_signal_control),
        check("determinism", secs(120), determinism),
        check("fusion shape law", secs(1), fusion_shape_law),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
