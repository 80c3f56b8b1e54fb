use std::path::Path;
use std::process::{Command, Output};
use std::sync::OnceLock;

use shiftlens::detector::DetectionReport;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_shiftlens"));
    c.env_remove("SHIFTLENS_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn shiftlens")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two small sprite datasets plus PCA and concept models, built once.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let f = Fixture { dir };
        for (name, seed) in [("source", "1"), ("target", "2")] {
            let o = run(&["gen-data", "--schema", "sprites", "--n", "3000", "--seed", seed, "--out", p(&f.path(name))]);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
        }
        let o = run(&["train", "--dataset", p(&f.path("source")), "--method", "pca", "--out", p(&f.path("pca"))]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = run(&[
            "train", "--dataset", p(&f.path("source")), "--method", "cbm", "--out", p(&f.path("cbm")),
            "--epochs", "40", "--hidden", "128", "--seed", "3",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        f
    })
}

#[test]
fn zero_samples_is_a_usage_error_naming_the_flag() {
    let o = run(&["gen-data", "--schema", "sprites", "--n", "0", "--out", "/tmp/unused"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--n"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["detect", "--bogus"]);
    assert_eq!(code(&o), 2);
    let o = run(&["frobnicate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_input_is_a_runtime_error() {
    let o = run(&["report", "--results", "/nonexistent/results"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn gen_data_is_seeded() {
    let dir = TempDir::new().unwrap();
    for name in ["a", "b"] {
        let o = run(&["gen-data", "--schema", "rooms", "--n", "50", "--seed", "9", "--out", p(&dir.path().join(name))]);
        assert_eq!(code(&o), 0);
    }
    for file in ["manifest.json", "images.bin", "labels.bin"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn detect_identical_inputs_reports_no_shift() {
    let f = fixture();
    let src = f.path("source");
    let pca = f.path("pca");
    let args = [
        "detect", "--source", p(&src), "--target", p(&src), "--model", p(&pca), "--method", "PCA", "--json",
    ];
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["shift_detected"], false);
    let report: DetectionReport = serde_json::from_value(v.clone()).unwrap();
    assert_eq!(serde_json::to_value(&report).unwrap(), v);
    assert_eq!(stdout(&run(&args)), stdout(&o));
}

#[test]
fn detect_exits_three_on_shift() {
    let f = fixture();
    let o = run(&[
        "detect", "--source", p(&f.path("source")), "--target", p(&f.path("target")), "--model", p(&f.path("cbm")),
        "--method", "CBSDh", "--shift", r#"{"kind":"knockout","delta":1.0}"#, "--json",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["shift_detected"], true);
    assert_eq!(v["provenance"]["shift"]["kind"], "knockout");
    assert!(v["per_concept"].as_array().unwrap().len() == 5);
}

#[test]
fn explain_ranks_scale_first_under_scale_shift() {
    let f = fixture();
    let o = run(&[
        "explain", "--source", p(&f.path("source")), "--target", p(&f.path("target")), "--model", p(&f.path("cbm")),
        "--shift", r#"{"kind":"concept","targets":[{"concept":"scale"}],"intensity":"large"}"#,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("rank"));
    let first = lines.next().unwrap();
    assert_eq!(first.split_whitespace().nth(1), Some("scale"), "{out}");
}

#[test]
fn explain_refuses_non_concept_methods() {
    let f = fixture();
    let o = run(&[
        "explain", "--source", p(&f.path("source")), "--target", p(&f.path("source")), "--model", p(&f.path("pca")),
        "--method", "PCA",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn experiment_and_report_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    let cfg = serde_json::json!({
        "dataset": {"schema": "sprites", "n": 1500, "seed": 4},
        "models": {"training": {"hidden": [32], "sgd": {"max_epochs": 5, "patience": 10, "learning_rate": 0.02, "momentum": 0.9, "batch_size": 64},
                                 "label_sgd": {"max_epochs": 5, "patience": 10, "learning_rate": 0.1, "momentum": 0.9, "batch_size": 128},
                                 "pool": 2, "seed": 0}},
        "methods": ["PCA", "SRP", "BBSDh", "CBSDs"],
        "sample_sizes": [10, 50],
        "shifts": [{"kind": "gaussian", "intensity": "large"}],
        "runs_per_cell": 4,
        "repetitions": 2,
        "cache_dir": p(&dir.path().join("cache")),
    });
    std::fs::write(&config, cfg.to_string()).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("out{threads}"));
        let o = run(&["experiment", "--config", p(&config), "--out", p(&out), "--threads", threads, "--seed", "5"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outputs.push(out);
    }
    let acc = |d: &Path| std::fs::read_to_string(d.join("accuracy.csv")).unwrap();
    assert_eq!(acc(&outputs[0]), acc(&outputs[1]));
    // 2 shifts x 4 methods x 2 sizes, plus comment and header lines
    assert_eq!(acc(&outputs[0]).lines().count(), 2 + 16);

    let regen = dir.path().join("regen");
    let o = run(&["report", "--results", p(&outputs[0]), "--out", p(&regen)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for entry in std::fs::read_dir(&regen).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(regen.join(&name)).unwrap();
        let b = std::fs::read(outputs[0].join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
}

#[test]
fn threads_fall_back_to_environment() {
    let o = bin()
        .env("SHIFTLENS_THREADS", "0")
        .args(["experiment", "--config", "/nonexistent.json"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}
