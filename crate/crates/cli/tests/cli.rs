//! End-to-end checks of the binary: pipeline wiring, exit codes, error
//! categories, and config handling.

use std::path::Path;
use std::process::{Command, Output};

fn fvkit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvkit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn gen_small(dir: &Path) {
    let out = fvkit(
        &[
            "gen-synthetic",
            "--out",
            "data",
            "--classes",
            "3",
            "--train-per-class",
            "4",
            "--test-per-class",
            "2",
            "--features-per-image",
            "8",
            "--dim",
            "16",
            "--latent-atoms",
            "12",
            "--atoms-per-feature",
            "2",
            "--noise",
            "0.01",
            "--seed",
            "7",
        ],
        dir,
    );
    assert_ok(&out);
}

#[test]
fn full_pipeline_runs_and_reports_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen_small(dir);

    assert_ok(&fvkit(
        &[
            "train-dict", "--features", "data/train", "--codebook-size", "8",
            "--outer-iters", "5", "--seed", "7", "--out", "dict.fvkm",
        ],
        dir,
    ));
    assert_ok(&fvkit(
        &[
            "train-gmm", "--features", "data/train", "--components", "4",
            "--max-iter", "20", "--seed", "7", "--out", "gmm.fvkm",
        ],
        dir,
    ));
    assert_ok(&fvkit(
        &[
            "encode", "scfvc", "--features", "data/train", "--dict", "dict.fvkm",
            "--lambda", "0.05", "--out", "train_s.fvk",
        ],
        dir,
    ));
    assert_ok(&fvkit(
        &[
            "encode", "scfvc", "--features", "data/test", "--dict", "dict.fvkm",
            "--lambda", "0.05", "--out", "test_s.fvk",
        ],
        dir,
    ));
    assert_ok(&fvkit(
        &[
            "encode", "gmmfvc", "--features", "data/train", "--gmm", "gmm.fvkm",
            "--out", "train_g.fvk",
        ],
        dir,
    ));
    assert_ok(&fvkit(
        &[
            "encode", "gmmfvc", "--features", "data/test", "--gmm", "gmm.fvkm",
            "--out", "test_g.fvk",
        ],
        dir,
    ));

    // both encoders' metrics end up in one CSV via --append
    assert_ok(&fvkit(
        &[
            "classify", "--train-vectors", "train_s.fvk", "--train-labels", "data/train/labels.csv",
            "--test-vectors", "test_s.fvk", "--test-labels", "data/test/labels.csv",
            "--label", "scfvc", "--out", "metrics.csv",
        ],
        dir,
    ));
    assert_ok(&fvkit(
        &[
            "classify", "--train-vectors", "train_g.fvk", "--train-labels", "data/train/labels.csv",
            "--test-vectors", "test_g.fvk", "--test-labels", "data/test/labels.csv",
            "--label", "gmmfvc", "--out", "metrics.csv", "--append",
        ],
        dir,
    ));

    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "label,metric,value");
    assert!(lines.iter().any(|l| l.starts_with("scfvc,accuracy,")));
    assert!(lines.iter().any(|l| l.starts_with("gmmfvc,accuracy,")));
    for line in &lines[1..] {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&value));
    }
}

#[test]
fn missing_dictionary_exits_2_with_category() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen_small(dir);
    let out = fvkit(
        &[
            "encode", "scfvc", "--features", "data/train", "--dict", "missing.fvkm",
            "--out", "x.fvk",
        ],
        dir,
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(r#""category":"model-not-found""#), "{stderr}");
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fvkit(&["train-dict", "--bogus-flag"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(r#""category":"usage""#), "{stderr}");

    // help and version are not errors
    let out = fvkit(&["--help"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_input_features_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fvkit(
        &["train-gmm", "--features", "nowhere", "--components", "2", "--out", "g.fvkm"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(r#""category":"input-not-found""#), "{stderr}");
}

#[test]
fn corrupt_feature_file_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.fvk"), b"not a feature file").unwrap();
    let out = fvkit(
        &["train-gmm", "--features", "bad.fvk", "--components", "2", "--out", "g.fvkm"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(r#""category":"bad-format""#), "{stderr}");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen_small(dir);
    std::fs::write(dir.join("run.conf"), "codebook-size = 6\nseed = 7\nouter-iters = 3\n").unwrap();

    // config supplies codebook-size 6
    let out = fvkit(
        &[
            "train-dict", "--config", "run.conf", "--features", "data/train",
            "--lambda", "0.05", "--out", "d6.fvkm",
        ],
        dir,
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("dictionary: 6 atoms"));

    // the flag overrides the config
    let out = fvkit(
        &[
            "train-dict", "--config", "run.conf", "--features", "data/train",
            "--codebook-size", "4", "--lambda", "0.05", "--out", "d4.fvkm",
        ],
        dir,
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("dictionary: 4 atoms"));
}

#[test]
fn resolution_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = fvkit(
        &[
            "resolution", "--out", "res.csv", "--svg", "res.svg",
            "--features", "200", "--latent-atoms", "10", "--atoms-per-feature", "2",
            "--dims", "12,24", "--gmm-sizes", "6,12", "--components", "6",
            "--dict-size", "6", "--fixed-dim", "24", "--em-max-iter", "6",
            "--outer-iters", "3", "--seed", "11",
        ],
        dir,
    );
    assert_ok(&out);
    let csv = std::fs::read_to_string(dir.join("res.csv")).unwrap();
    assert!(csv.starts_with("model,param,dim,d\n"));
    // 2 dim-sweep rows + 2 size-sweep rows + 1 dictionary row
    assert_eq!(csv.lines().count(), 6);
    let svg = std::fs::read_to_string(dir.join("res.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
}
