use std::path::Path;
use std::process::{Command, Output};

use racecrt::{EmbeddingStore, EvalReport};

fn racecrt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_racecrt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = racecrt(dir, args);
    assert!(o.status.success(), "racecrt {args:?} failed:\n{}", stderr(&o));
    o
}

fn footage_dataset(dir: &Path, frames: &str) {
    ok(
        dir,
        &["synth", "--out", "data", "--runners", "2", "--recording-points", "2", "--frames", frames, "--footage", "--seed", "3"],
    );
}

#[test]
fn bad_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(racecrt(dir.path(), &["evaluate", "--folds", "many"]).status.code(), Some(1));
    assert_eq!(racecrt(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(racecrt(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn evaluate_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--out", "o", "--runners", "12"]);
    let o = racecrt(dir.path(), &["evaluate", "--out", "o"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn zero_jobs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(racecrt(dir.path(), &["synth", "--out", "o", "--jobs", "0"]).status.code(), Some(1));
}

#[test]
fn empty_manifest_preprocesses_to_nothing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        r#"{"race_start": 0.0, "recording_points": [0, 1], "observations": []}"#,
    )
    .unwrap();
    ok(dir.path(), &["preprocess", "--manifest", "m.json", "--out", "o"]);
    let stilled = std::fs::read_dir(dir.path().join("o/stilled")).unwrap().count();
    assert_eq!(stilled, 1, "only the manifest is written");
}

#[test]
fn missing_box_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    footage_dataset(dir.path(), "30");
    std::fs::remove_file(dir.path().join("data/tracks/R0002_rp1.csv")).unwrap();
    let o = racecrt(dir.path(), &["preprocess", "--manifest", "data/manifest.json", "--out", "o", "--tau", "30"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("R0002_rp1.csv"), "{err}");
    assert!(err.contains("R0002"), "{err}");
}

#[test]
fn preprocess_writes_tau_frames_per_observation() {
    let dir = tempfile::tempdir().unwrap();
    footage_dataset(dir.path(), "40");
    ok(dir.path(), &["preprocess", "--manifest", "data/manifest.json", "--out", "o", "--tau", "25"]);
    for runner in ["R0001", "R0002"] {
        for rp in 0..2 {
            let frames = std::fs::read_dir(dir.path().join(format!("o/stilled/{runner}_rp{rp}"))).unwrap().count();
            assert_eq!(frames, 25);
        }
    }
    let manifest = std::fs::read_to_string(dir.path().join("o/stilled/manifest.json")).unwrap();
    assert_eq!(manifest.matches("\"frames\": 25").count(), 4);
}

#[test]
fn stub_extraction_reports_clip_counts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    footage_dataset(dir.path(), "175");
    let args = [
        "extract", "--manifest", "data/manifest.json", "--out", "o", "--stub-backend", "--instances", "XS,L",
        "--stub-resolution", "16",
    ];
    let o = ok(dir.path(), &args);
    let log = stderr(&o);
    assert!(log.contains("XS: 3 clips per footage"), "{log}");
    assert!(log.contains("L: 2 clips per footage"), "{log}");

    let xs = dir.path().join("o/embeddings_XS.bin");
    let first = std::fs::read(&xs).unwrap();
    let store = EmbeddingStore::load(&xs).unwrap();
    assert_eq!((store.len(), store.dim()), (4, 192));

    ok(dir.path(), &args);
    assert_eq!(std::fs::read(&xs).unwrap(), first);
}

#[test]
fn fusion_of_stub_stores() {
    let dir = tempfile::tempdir().unwrap();
    footage_dataset(dir.path(), "60");
    ok(
        dir.path(),
        &["extract", "--manifest", "data/manifest.json", "--out", "o", "--stub-backend", "--instances", "XS,S"],
    );
    ok(dir.path(), &["fuse", "--out", "o", "--instances", "XS,S", "--fusion", "concat"]);
    let cat = EmbeddingStore::load(&dir.path().join("o/embeddings_cat_XS-S.bin")).unwrap();
    assert_eq!(cat.dim(), 384);

    let one = racecrt(dir.path(), &["fuse", "--out", "o", "--instances", "XS", "--fusion", "average"]);
    assert_eq!(one.status.code(), Some(2));
    let single = racecrt(dir.path(), &["fuse", "--out", "o", "--instances", "XS,S"]);
    assert_eq!(single.status.code(), Some(1));

    ok(dir.path(), &["fuse", "--out", "o", "--instances", "XS,S", "--fusion", "average"]);
    let avg = EmbeddingStore::load(&dir.path().join("o/embeddings_avg_XS-S.bin")).unwrap();
    let xs = EmbeddingStore::load(&dir.path().join("o/embeddings_XS.bin")).unwrap();
    let s = EmbeddingStore::load(&dir.path().join("o/embeddings_S.bin")).unwrap();
    assert_eq!(avg.dim(), 192);
    for (runner, rp) in avg.keys() {
        let a = xs.get(runner, *rp).unwrap();
        let b = s.get(runner, *rp).unwrap();
        let fused = avg.get(runner, *rp).unwrap();
        for j in 0..192 {
            let want = ((a[j] as f64 + b[j] as f64) / 2.0) as f32;
            assert!((fused[j] - want).abs() <= 1e-7, "{runner} rp{} dim {j}", rp.index());
        }
    }
}

#[test]
fn missing_embedding_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--out", "big", "--runners", "12", "--seed", "1"]);
    ok(dir.path(), &["synth", "--out", "small", "--runners", "11", "--seed", "1"]);
    let o = racecrt(
        dir.path(),
        &["evaluate", "--manifest", "big/manifest.json", "--store", "small/embeddings_XS.bin", "--out", "e", "--seed", "1"],
    );
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("R0012") && err.contains("0"), "{err}");
}

#[test]
fn evaluate_and_report_formats() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--out", "o", "--runners", "20", "--instances", "XS,M", "--fusion", "concat", "--seed", "2"]);
    let text = ok(
        dir.path(),
        &["evaluate", "--out", "o", "--instances", "XS,M", "--fusion", "concat", "--seed", "2", "--repetitions", "2",
          "--folds", "3", "--save-model", "o/model.bin"],
    );
    let table = String::from_utf8(text.stdout).unwrap();
    assert!(table.contains("XS\u{222a}M"), "{table}");
    assert!(dir.path().join("o/model.bin").is_file());

    let report_path = dir.path().join("o/report_cat_XS-M.json");
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!((report.embedding_dim, report.fold_maes.len()), (384, 6));

    let csv_out = ok(dir.path(), &["report", "o/report_cat_XS-M.json", "--format", "csv"]);
    let mut reader = csv::Reader::from_reader(csv_out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][1], "concat");

    let json_out = ok(dir.path(), &["report", "o/report_cat_XS-M.json", "--format", "json", "--out", "t"]);
    let parsed: Vec<EvalReport> = serde_json::from_slice(&json_out.stdout).unwrap();
    assert_eq!(parsed, vec![report]);
    assert!(dir.path().join("t/table.json").is_file());

    assert_eq!(racecrt(dir.path(), &["report", "o/nope.json"]).status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("pipeline.json"),
        r#"{"out": "cfg_out", "seed": 4, "synthetic": {"runners": 15, "recording_points": 2},
            "cv": {"repetitions": 2, "folds": 3}}"#,
    )
    .unwrap();
    ok(dir.path(), &["synth", "--config", "pipeline.json"]);
    ok(dir.path(), &["evaluate", "--config", "pipeline.json", "--folds", "5"]);
    let report: EvalReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cfg_out/report_XS.json")).unwrap()).unwrap();
    assert_eq!((report.observations, report.repetitions, report.folds, report.seed), (30, 2, 5, 4));

    std::fs::write(dir.path().join("bad.json"), r#"{"folds": 3}"#).unwrap();
    assert_eq!(racecrt(dir.path(), &["synth", "--config", "bad.json"]).status.code(), Some(1));
}
