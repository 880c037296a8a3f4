use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dlp_core::synth::{self, SynthSpec};

fn dlpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlpc")).args(args).output().expect("run dlpc")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path, docs_per_class: usize) -> PathBuf {
    let corpus = synth::generate(&SynthSpec {
        docs_per_class,
        ..Default::default()
    })
    .unwrap();
    synth::write_corpus(&corpus, dir).unwrap()
}

fn fast_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, "seed = 3\n[gbdt]\nn_iterations = 30\n[tune]\nn_splits = 3\n").unwrap();
    path
}

#[test]
fn train_evaluate_classify_scan() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 40);
    let config = fast_config(dir.path());
    let out = dir.path().join("out");

    let train = dlpc(&["train", "--manifest", s(&manifest), "--config", s(&config), "--out-dir", s(&out)]);
    assert_eq!(train.status.code(), Some(0), "{}", String::from_utf8_lossy(&train.stderr));
    assert!(String::from_utf8_lossy(&train.stdout).contains("classification report"));
    let bundle = out.join("bundle.json");
    for file in ["bundle.json", "report.json", "report.txt"] {
        assert!(out.join(file).is_file(), "{file}");
    }

    let eval_dir = dir.path().join("eval");
    let eval = dlpc(&["evaluate", "--bundle", s(&bundle), "--manifest", s(&manifest), "--out-dir", s(&eval_dir)]);
    assert_eq!(eval.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["total"], 120);
    assert!(report["multiclass_accuracy"].as_f64().unwrap() >= 0.9);

    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let classify = dlpc(&["classify", "--bundle", s(&bundle), s(&empty)]);
    assert_eq!(classify.status.code(), Some(0));
    let line: serde_json::Value = serde_json::from_slice(&classify.stdout).unwrap();
    assert_eq!(line["zero_vector"], true);
    assert_eq!(line["label"], "Internal");

    let restricted = dir.path().join("leak.txt");
    fs::write(&restricted, fs::read_to_string(dir.path().join("docs/restricted-0000.txt")).unwrap()).unwrap();
    let scan = dlpc(&["scan", "--bundle", s(&bundle), s(&restricted)]);
    assert_eq!(scan.status.code(), Some(3));
    let verdict: serde_json::Value = serde_json::from_slice(&scan.stdout).unwrap();
    assert_eq!(verdict["action"], "Block");
    assert_eq!(verdict["label"], "Restricted");

    let policy = dir.path().join("policy.toml");
    fs::write(&policy, "Restricted = \"alert\"\n").unwrap();
    let scan = dlpc(&["scan", "--bundle", s(&bundle), "--policy", s(&policy), s(&restricted)]);
    assert_eq!(scan.status.code(), Some(0));
    let verdict: serde_json::Value = serde_json::from_slice(&scan.stdout).unwrap();
    assert_eq!(verdict["action"], "Alert");
}

#[test]
fn training_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 10);
    let config = fast_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let run = dlpc(&["train", "--manifest", s(&manifest), "--config", s(&config), "--out-dir", s(out)]);
        assert_eq!(run.status.code(), Some(0));
    }
    for file in ["bundle.json", "report.json", "report.txt"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn tune_lists_every_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 10);
    let config = fast_config(dir.path());
    let grid = dir.path().join("grid.toml");
    fs::write(&grid, "[gbdt]\nmax_depth = [1, 2]\nlearning_rate = [0.1, 0.3]\n").unwrap();
    let out = dir.path().join("out");
    let run = dlpc(&[
        "tune",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--grid",
        s(&grid),
        "--n-candidates",
        "3",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("tune_result.json")).unwrap()).unwrap();
    assert_eq!(result["trials"].as_array().unwrap().len(), 3);
    assert!(out.join("bundle.json").is_file());

    let too_many = dlpc(&["tune", "--manifest", s(&manifest), "--grid", s(&grid), "--n-candidates", "5"]);
    assert_eq!(too_many.status.code(), Some(2));
}

#[test]
fn usage_and_validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "salary").unwrap();
    fs::write(dir.path().join("b.txt"), "password").unwrap();
    let one_class = dir.path().join("one.tsv");
    fs::write(&one_class, "a.txt\tRestricted\nb.txt\tRestricted\n").unwrap();
    let out = dir.path().join("out");

    let run = dlpc(&["train", "--manifest", s(&one_class), "--out-dir", s(&out)]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("at least 2 classes"));

    assert_eq!(dlpc(&["train"]).status.code(), Some(2));
    assert_eq!(dlpc(&["frobnicate"]).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"format_version\": 99}").unwrap();
    let run = dlpc(&["classify", "--bundle", s(&bad), s(&dir.path().join("a.txt"))]);
    assert_eq!(run.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("99") && stderr.contains("expected 1"), "{stderr}");
}
