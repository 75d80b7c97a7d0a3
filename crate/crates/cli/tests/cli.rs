use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn msapdm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msapdm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn small_synth(dir: &Path, name: &str) -> PathBuf {
    let out = msapdm(dir, &["synth", "--per-class", "30", "--out", name]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join(name)
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_synth(dir.path(), "a.bin");
    let b = small_synth(dir.path(), "b.bin");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = msapdm(dir.path(), &["synth", "--per-class", "30", "--seed", "8", "--out", "c.bin"]);
    assert_eq!(code(&c), 0);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(dir.path().join("c.bin")).unwrap());
    let summary = stdout_json(&c);
    assert_eq!(summary["windows"], 180);
    assert_eq!(summary["classes"], 6);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&msapdm(p, &["synth", "--classes", "1", "--out", "x.bin"])), 1);
    assert_eq!(code(&msapdm(p, &["bench", "--mode", "sideways"])), 1);
    assert_eq!(code(&msapdm(p, &["no-such-command"])), 1);
    assert_eq!(code(&msapdm(p, &["synth"])), 1);
    let data = small_synth(p, "d.bin");
    let d = data.to_str().unwrap();
    assert_eq!(code(&msapdm(p, &["train", "--data", d, "--out", "m.bin", "--scales", "1", "--epochs", "0"])), 1);
    assert_eq!(code(&msapdm(p, &["train", "--data", d, "--out", "m.bin", "--batch-size", "0"])), 1);
    assert_eq!(code(&msapdm(p, &["train", "--data", d, "--out", "m.bin", "--split", "0:0:0"])), 1);
    assert_eq!(code(&msapdm(p, &["--help"])), 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = msapdm(p, &["train", "--data", "missing.bin", "--out", "m.bin"]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
    std::fs::write(p.join("junk.bin"), b"not a container").unwrap();
    assert_eq!(code(&msapdm(p, &["eval", "--model", "junk.bin", "--data", "junk.bin"])), 2);
    assert_eq!(code(&msapdm(p, &["bench", "--model", "missing.bin", "--window-seconds", "2"])), 2);
}

#[test]
fn untrained_model_scores_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = msapdm(p, &["synth", "--out", "d.bin"]);
    assert_eq!(code(&out), 0);
    let t = msapdm(p, &["train", "--data", "d.bin", "--epochs", "0", "--out", "m.bin"]);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    assert_eq!(stdout_json(&t)["best_epoch"], 0);
    let e = msapdm(p, &["eval", "--model", "m.bin", "--data", "d.bin", "--out", "metrics.json"]);
    assert_eq!(code(&e), 0, "{}", String::from_utf8_lossy(&e.stderr));
    let metrics = stdout_json(&e);
    let mut keys: Vec<&str> = metrics.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["accuracy", "confusion", "f1_macro", "f1_weighted"]);
    let acc = metrics["accuracy"].as_f64().unwrap();
    assert!((acc - 1.0 / 6.0).abs() <= 0.1, "accuracy {acc}");
    assert_eq!(read_json(&p.join("metrics.json")), metrics);
    let confusion = metrics["confusion"].as_array().unwrap();
    assert_eq!(confusion.len(), 6);
    let total: u64 = confusion.iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 120);
}

#[test]
fn zero_learning_rate_gives_flat_history() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_synth(p, "d.bin");
    let t = msapdm(p, &["train", "--data", "d.bin", "--lr", "0", "--epochs", "3", "--out", "m.bin"]);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    let history = std::fs::read_to_string(p.join("m.bin.history.jsonl")).unwrap();
    let records: Vec<Value> = history.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    let losses: Vec<f64> = records.iter().map(|r| r["train_loss"].as_f64().unwrap()).collect();
    assert!(losses.iter().all(|l| (l - losses[0]).abs() < 1e-6), "{losses:?}");
    let val: Vec<f64> = records.iter().map(|r| r["val_accuracy"].as_f64().unwrap()).collect();
    assert!(val.iter().all(|v| *v == val[0]));
}

#[test]
fn bench_reports_budget_and_gates() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = msapdm(p, &["bench", "--mode", "stream", "--window-seconds", "4.5", "--n", "20", "--out", "r.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = stdout_json(&out);
    assert_eq!(r["budget_ms"], 225.0);
    assert_eq!(r["mode"], "stream");
    assert_eq!(r["deployable"], true);
    assert!(p.join("r.json").exists());
    assert!(p.join("r.json.manifest.json").exists());

    let out = msapdm(p, &["bench", "--preset", "UCI-HAR", "--mode", "burst", "--n", "10"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["budget_ms"], 128.0);

    // a budget no real inference can meet
    let out = msapdm(p, &["bench", "--window-seconds", "0.0000001", "--n", "5"]);
    assert_eq!(code(&out), 3);
    assert_eq!(read_json(&p.join("msapdm-bench.manifest.json"))["exit_code"], 3);
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = msapdm(dir.path(), &["gradcheck", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let r = stdout_json(&out);
    assert_eq!(r["passed"], true);
    assert!(r["entries"].as_array().unwrap().len() > 10);
    let fail = msapdm(dir.path(), &["gradcheck", "--tolerance", "1e-30"]);
    assert_eq!(code(&fail), 3);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("cfg.json"),
        r#"{ "synth": { "n_per_class": 12, "channels": 2 } }"#,
    )
    .unwrap();
    let out = msapdm(p, &["synth", "--per-class", "50", "--classes", "3", "--config", "cfg.json", "--out", "d.bin"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["windows"], 36);
    let manifest = read_json(&p.join("d.bin.manifest.json"));
    assert_eq!(manifest["config"]["synth"]["channels"], 2);
    assert_eq!(manifest["config"]["synth"]["n_classes"], 3);

    std::fs::write(
        p.join("train.json"),
        r#"{ "train": { "epochs": 1 }, "model": { "width": 2, "scales": 2, "groups": 1 } }"#,
    )
    .unwrap();
    let out = msapdm(p, &["train", "--data", "d.bin", "--epochs", "7", "--width", "8", "--config", "train.json", "--out", "m.bin"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read_json(&p.join("m.bin.manifest.json"));
    assert_eq!(manifest["config"]["train"]["epochs"], 1);
    assert_eq!(manifest["config"]["model"]["width"], 2);
    assert_eq!(manifest["config"]["model"]["in_channels"], 2);
    assert_eq!(manifest["status"], "ok");
    let lines = std::fs::read_to_string(p.join("m.bin.history.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 1);

    std::fs::write(p.join("bad.json"), r#"{ "train": { "epoch": 1 } }"#).unwrap();
    assert_eq!(code(&msapdm(p, &["train", "--data", "d.bin", "--config", "bad.json", "--out", "m2.bin"])), 1);
    std::fs::write(p.join("bad2.json"), r#"{ "optimizer": {} }"#).unwrap();
    assert_eq!(code(&msapdm(p, &["train", "--data", "d.bin", "--config", "bad2.json", "--out", "m2.bin"])), 1);
}

#[test]
fn manifest_records_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = msapdm(p, &["--manifest", "run.json", "train", "--data", "nope.bin", "--out", "m.bin"]);
    assert_eq!(code(&out), 2);
    let m = read_json(&p.join("run.json"));
    assert_eq!(m["command"], "train");
    assert_eq!(m["exit_code"], 2);
    assert!(m["error"].as_str().unwrap().contains("nope.bin"));
    assert!(m["finished_at"].is_string());
}

#[test]
fn window_command_builds_dataset_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut csv = String::from("user,activity,x,y,z\n");
    for user in 1..=2 {
        for t in 0..60 {
            let label = if t < 30 { "Sitting" } else { "Walking" };
            csv.push_str(&format!("{user},{label},{},{},{}\n", t as f32 * 0.1, (t as f32).sin(), user));
        }
    }
    std::fs::write(p.join("raw.csv"), csv).unwrap();
    let out = msapdm(
        p,
        &["window", "--csv", "raw.csv", "--label", "activity", "--channels", "x,y,z", "--subject", "user", "--rate", "20", "--window", "20", "--out", "w.bin"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = stdout_json(&out);
    assert_eq!(s["subjects"], 2);
    assert_eq!(s["windows"], 2 * 5);
    assert_eq!(s["classes"], serde_json::json!(["Sitting", "Walking"]));

    let t = msapdm(p, &["train", "--data", "w.bin", "--epochs", "1", "--scales", "2", "--width", "2", "--groups", "1", "--split", "6:2:2", "--out", "m.bin"]);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));

    let missing = msapdm(p, &["window", "--csv", "raw.csv", "--label", "activity", "--channels", "x,q", "--rate", "20", "--window", "20", "--out", "w2.bin"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn complexity_covers_all_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = msapdm(dir.path(), &["complexity", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = stdout_json(&out);
    let names: Vec<&str> = rows.as_array().unwrap().iter().map(|r| r["dataset"].as_str().unwrap()).collect();
    assert_eq!(names, ["PAMAP2", "WISDM", "OPPORTUNITY", "UCI-HAR"]);
    assert!(rows.as_array().unwrap().iter().all(|r| r["params"].as_u64().unwrap() > 0));
}
