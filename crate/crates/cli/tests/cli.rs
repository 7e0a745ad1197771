use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use granusense::classify::{ConfusionMatrix, DatasetManifest, EpochLog, MANIFEST_FILE};
use granusense_cli::run::{RunRecord, FAILED_MARKER, RUN_RECORD};
use granusense_cli::tables::{read_csv, SweepRow, VibrationRow, VibrationSummaryRow};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_granusense"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/accel")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Small but complete corpus: 32×32 images at 0.5 mm pitch.
const TINY: &str = r#"
seed = 5
[dataset]
per_class = 30
[dataset.grid]
width = 32
height = 32
resolution_mm = 0.5
[train]
epochs = 1
batch_size = 16
"#;

#[test]
fn print_defaults_is_a_valid_config() {
    let out = run(&["--print-defaults"]);
    assert!(out.status.success());
    let cfg: granusense_cli::config::ExperimentConfig = toml::from_str(&text(&out.stdout)).unwrap();
    assert_eq!(cfg, Default::default());
}

#[test]
fn sweep_outputs_round_trip_and_repeat() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = run(&[
            "vibration-sweep",
            "--deterministic",
            "--seed",
            "4",
            "--out",
            s(d),
        ]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        let stdout = text(&out.stdout);
        assert!(
            stdout.contains("sand: stall depth 10 V / 0 V = "),
            "{stdout}"
        );
    }
    let files = read_dir_sorted(&a);
    assert_eq!(
        files.iter().filter(|(n, _)| n.ends_with("V.csv")).count(),
        10
    );
    assert_eq!(files, read_dir_sorted(&b));

    let rows: Vec<SweepRow> = read_csv(&a.join("sweep_summary.csv")).unwrap();
    assert_eq!(rows.len(), 10);
    let trace = granusense::sim::ForceTrace::read_csv(
        std::fs::File::open(a.join("rice_10V.csv")).unwrap(),
        &a,
    )
    .unwrap();
    let rice10 = rows
        .iter()
        .find(|r| r.medium == "rice" && r.voltage_v == 10.0)
        .unwrap();
    assert_eq!(trace.len(), rice10.samples);

    let record = RunRecord::load(&a.join(RUN_RECORD)).unwrap();
    assert_eq!(record.command, "vibration-sweep");
    assert!(record.outputs.iter().all(|o| a.join(o).exists()));

    // --force rerun in place gives the same bytes.
    let out = run(&[
        "vibration-sweep",
        "--deterministic",
        "--seed",
        "4",
        "--out",
        s(&a),
        "--force",
    ]);
    assert!(out.status.success());
    assert_eq!(read_dir_sorted(&a), files);
}

#[test]
fn existing_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("notes.txt"), "mine").unwrap();
    let out = run(&["penetrate", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("--force"));
    let out = run(&[
        "penetrate",
        "--out",
        s(tmp.path()),
        "--force",
        "--voltage",
        "0",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(tmp.path().join("notes.txt").exists());
    assert!(tmp.path().join("trace_smoothed.csv").exists());
}

#[test]
fn dry_run_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("never");
    let out = run(&["pipeline", "--dry-run", "--out", s(&dir)]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(
        stdout.contains("per_class = 300") && stdout.contains("confusion.svg"),
        "{stdout}"
    );
    assert!(!dir.exists());
}

#[test]
fn bad_config_names_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[penetrate]\nvoltage = 9\n").unwrap();
    let out = run(&[
        "penetrate",
        "--config",
        s(&cfg),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        text(&out.stderr).contains("penetrate.voltage"),
        "{}",
        text(&out.stderr)
    );

    std::fs::write(&cfg, "[train]\nepoch = 3\n").unwrap();
    let out = run(&["gen-dataset", "--config", s(&cfg), "--dry-run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_bundled_fixtures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["analyze-vibration", s(&fixtures()), "--out", s(tmp.path())]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let summary: Vec<VibrationSummaryRow> =
        read_csv(&tmp.path().join("vibration_summary.csv")).unwrap();
    let labels: Vec<&str> = summary.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["6V", "8V", "10V", "12V"]);
    for (row, f) in summary.iter().zip([156.0, 189.0, 213.0, 172.0]) {
        assert_eq!(row.trials, 2);
        assert!((row.frequency_hz - f).abs() <= 0.5, "{row:?}");
    }
    let table: Vec<VibrationRow> = read_csv(&tmp.path().join("vibration_table.csv")).unwrap();
    assert_eq!(table.len(), 8);
}

#[test]
fn analyze_rejects_empty_file() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = run(&[
        "analyze-vibration",
        s(&empty),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert!(!out.status.success());
    assert!(
        text(&out.stderr).contains("line 1"),
        "{}",
        text(&out.stderr)
    );
    assert!(tmp.path().join("o").join(FAILED_MARKER).exists());
}

#[test]
fn synth_accel_matches_bundled_fixtures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["synth-accel", "--deterministic", "--out", s(tmp.path())]);
    assert!(out.status.success());
    for (name, bytes) in read_dir_sorted(&fixtures()) {
        assert_eq!(
            std::fs::read(tmp.path().join(&name)).unwrap(),
            bytes,
            "{name}"
        );
    }
}

#[test]
fn small_pipeline_then_predict() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let dir = tmp.path().join("p");
    let out = run(&[
        "pipeline",
        "--deterministic",
        "--config",
        s(&cfg),
        "--out",
        s(&dir),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("test accuracy:"));

    let manifest = DatasetManifest::load(&dir.join("dataset").join(MANIFEST_FILE)).unwrap();
    manifest.verify().unwrap();
    let log: Vec<EpochLog> = read_csv(&dir.join("train_log.csv")).unwrap();
    assert_eq!(log.len(), 1);
    let cm_text = std::fs::read_to_string(dir.join("confusion.csv")).unwrap();
    let cm = ConfusionMatrix::from_csv(&cm_text, &dir).unwrap();
    assert_eq!(cm.to_csv(), cm_text);
    assert_eq!(cm.row_sums(), [2; 9]);
    assert!(std::fs::read_to_string(dir.join("report.txt"))
        .unwrap()
        .contains("accuracy:"));

    // Standalone evaluate agrees with the pipeline.
    let model = dir.join("model.bin");
    let eval_dir = tmp.path().join("e");
    let out = run(&[
        "evaluate",
        "--model",
        s(&model),
        "--dataset",
        s(&dir.join("dataset")),
        "--out",
        s(&eval_dir),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(
        std::fs::read_to_string(eval_dir.join("confusion.csv")).unwrap(),
        cm_text
    );

    let entry = manifest
        .entries
        .iter()
        .find(|e| e.split == granusense::classify::Split::Test)
        .unwrap();
    let out = run(&["predict", "--model", s(&model), s(&manifest.path_of(entry))]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let line = text(&out.stdout);
    let (label, conf) = line.trim().split_once(',').unwrap();
    label.parse::<granusense::classify::ClassLabel>().unwrap();
    let conf: f64 = conf.parse().unwrap();
    assert!((0.0..=1.0).contains(&conf));

    let corrupt = tmp.path().join("bad.png");
    std::fs::write(&corrupt, b"\x89PNG not really").unwrap();
    let out = run(&["predict", "--model", s(&model), s(&corrupt)]);
    assert!(!out.status.success());
    assert!(
        text(&out.stderr).contains("decode"),
        "{}",
        text(&out.stderr)
    );

    let big = tmp.path().join("big.png");
    let bg = granusense::tactile::background(&Default::default(), &Default::default());
    granusense::tactile::io::save_image(&bg, &big).unwrap();
    let out = run(&["predict", "--model", s(&model), s(&big)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        text(&out.stderr).contains("expects 32×32"),
        "{}",
        text(&out.stderr)
    );

    let out = run(&[
        "predict",
        "--model",
        s(&tmp.path().join("missing.bin")),
        s(&big),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_stage_leaves_marker_and_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("diverge.toml");
    std::fs::write(&cfg, format!("{TINY}learning_rate = 1e150\n")).unwrap();
    let dir = tmp.path().join("p");
    let out = run(&["pipeline", "--config", s(&cfg), "--out", s(&dir)]);
    assert_eq!(out.status.code(), Some(1));
    let marker = std::fs::read_to_string(dir.join(FAILED_MARKER)).unwrap();
    assert!(marker.contains("stage: train"), "{marker}");
    assert!(dir.join("dataset").join(MANIFEST_FILE).exists());
    assert!(!dir.join(RUN_RECORD).exists());
}
