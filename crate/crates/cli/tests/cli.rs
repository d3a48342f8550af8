//! Drives the `fitcf` binary against the toy corpus and scripted endpoints.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/toy")
}

fn fitcf(dir: &Path, args: &[&str]) -> Output {
    let config = toy().join("config.toml");
    Command::new(env!("CARGO_BIN_EXE_fitcf"))
        .current_dir(dir)
        .arg("--config")
        .arg(&config)
        .arg("--cache-dir")
        .arg(dir.join("cache"))
        .args(args)
        .output()
        .expect("spawn fitcf")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_three_core_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fitcf(tmp.path(), &["run", "--out", "run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["records.jsonl", "report.json", "manifest.json"] {
        assert!(tmp.path().join("run").join(f).is_file(), "{f}");
    }
    let listed = String::from_utf8(o.stdout).unwrap();
    assert!(listed.lines().any(|l| l.ends_with("report.json")));
}

#[test]
fn default_run_directory_is_timestamp_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fitcf(tmp.path(), &["--set", &format!("runtime.output_dir={:?}", tmp.path().join("runs").display().to_string()), "run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let runs: Vec<_> = std::fs::read_dir(tmp.path().join("runs"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "cache")
        .collect();
    assert_eq!(runs.len(), 1);
    let (ts, hash) = runs[0].split_once('-').unwrap();
    assert_eq!(ts.len(), "20260101T000000Z".len());
    assert_eq!(hash.len(), 12);
}

#[test]
fn zero_demonstrations_is_a_config_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fitcf(tmp.path(), &["--set", "demos_per_instance=0", "run", "--out", "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("demos_per_instance"));
}

#[test]
fn overrides_are_recorded_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fitcf(tmp.path(), &["--set", "flip_verification=false", "--seed", "11", "run", "--out", "run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("run/manifest.json")).unwrap()).unwrap();
    let overrides: Vec<&str> = m["overrides"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(overrides.contains(&"flip_verification=false"));
    assert!(overrides.contains(&"seed=11"));
    assert_eq!(m["config"]["flip_verification"], false);
    assert_eq!(m["seed"], 11);
}

#[test]
fn offline_cold_cache_is_an_endpoint_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fitcf(tmp.path(), &["--offline", "run", "--out", "run"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn empty_dataset_is_degraded_input() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = fitcf(tmp.path(), &["--set", &format!("dataset.path={:?}", empty.display().to_string()), "run"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn warm_cache_then_offline_replay_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fitcf(tmp.path(), &["cache", "warm"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = fitcf(tmp.path(), &["--offline", "run", "--out", "a"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = fitcf(tmp.path(), &["--offline", "run", "--out", "b"]);
    assert_eq!(b.status.code(), Some(0));
    for f in ["records.jsonl", "report.json"] {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(f)).unwrap(),
            std::fs::read(tmp.path().join("b").join(f)).unwrap()
        );
    }
    let inspect = fitcf(tmp.path(), &["cache", "inspect"]);
    assert!(String::from_utf8_lossy(&inspect.stdout).contains("/chat/completions"));
}

#[test]
fn ablate_writes_eight_cells_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fitcf(tmp.path(), &["ablate", "--out", "grid"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cells = std::fs::read_dir(tmp.path().join("grid"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .count();
    assert_eq!(cells, 8);
    let table = std::fs::read_to_string(tmp.path().join("grid/ablation_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 9);
    let golden = std::fs::read_to_string(toy().join("golden/ablation_table.csv")).unwrap();
    assert_eq!(table, golden);
}

#[test]
fn evaluate_faithfulness_correlate_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = fitcf(d, &["run", "--out", "lime"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = fitcf(d, &["evaluate", "--records", "lime/records.jsonl", "--out", "eval"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let eval: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("eval/evaluation.json")).unwrap()).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("lime/report.json")).unwrap()).unwrap();
    assert_eq!(eval["slfr"], report["evaluation"]["slfr"]);

    for m in ["gradient", "integrated_gradients", "shap"] {
        let o = fitcf(d, &["--set", &format!("attribution_method={m}"), "run", "--out", m]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = fitcf(d, &["--set", "shap.exact_max_words=8", "--set", "shap.n_samples=64", "faithfulness", "--out", "faith"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let faith: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("faith/faithfulness.json")).unwrap()).unwrap();
    assert_eq!(faith["methods"].as_object().unwrap().len(), 4);

    let o = Command::new(env!("CARGO_BIN_EXE_fitcf"))
        .current_dir(d)
        .args(["correlate", "--faithfulness", "faith/faithfulness.json", "--runs", "lime", "gradient", "integrated_gradients", "shap"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let corr: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("faith/correlation.json")).unwrap()).unwrap();
    assert_eq!(corr["entries"].as_array().unwrap().len(), 9);

    let o = Command::new(env!("CARGO_BIN_EXE_fitcf"))
        .current_dir(d)
        .args(["report", "--runs", "lime", "shap", "--out", "exports"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = std::fs::read_to_string(d.join("exports/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let rows = std::fs::read_to_string(d.join("exports/records.csv")).unwrap();
    assert_eq!(rows.lines().count(), 41);
}
