use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn sbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbp"))
        .args(args)
        .env_remove("SBP_OUTPUT_DIR")
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn threshold_from_bound_and_density() {
    let v = json(&sbp(&["threshold", "--K", "1"]));
    assert!((v["result"]["alpha_c"].as_f64().unwrap() - 1.8157).abs() < 5e-4);
    assert_eq!(v["config"]["K"], 1.0);
    assert!(v["metadata"]["version"].is_string());
    let v = json(&sbp(&["threshold", "--alpha", "1.8157"]));
    assert!((v["result"]["k_c"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn domain_and_usage_errors_have_distinct_codes() {
    assert_eq!(sbp(&["threshold", "--K", "0"]).status.code(), Some(1));
    assert_eq!(sbp(&["threshold", "--K", "1", "--alpha", "2"]).status.code(), Some(1));
    assert_eq!(sbp(&["threshold", "--bogus"]).status.code(), Some(2));
    let out = sbp(&["experiment", "--kind", "nope", "--n-list", "8", "--trials", "2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    // Stochastic subcommands refuse to run without a seed.
    assert_eq!(sbp(&["solve", "--n", "8"]).status.code(), Some(2));
    assert_eq!(sbp(&["capacity", "--n", "8"]).status.code(), Some(2));
}

#[test]
fn shape_verify_regimes() {
    let v = json(&sbp(&["shape-verify", "--K", "1", "--grid-step", "1e-4"]));
    assert_eq!(v["result"]["verified"], true);
    let v = json(&sbp(&["shape-verify", "--K", "0.05"]));
    assert_eq!(v["result"]["regime"], "K<0.1");
    assert!((v["result"]["b1"].as_f64().unwrap() - 0.05 / 12.0).abs() < 1e-3);
    let v = json(&sbp(&["shape-verify", "--K", "5"]));
    assert_eq!(v["result"]["regime"], "K>4");
}

#[test]
fn solve_and_count_agree_across_methods() {
    let gray = json(&sbp(&["solve", "--n", "12", "--seed", "4", "--stream", "2"]));
    let pruned = json(&sbp(&["solve", "--n", "12", "--seed", "4", "--stream", "2", "--method", "pruned"]));
    assert_eq!(gray["result"]["report"]["disc_value"], pruned["result"]["report"]["disc_value"]);
    let c1 = json(&sbp(&["count", "--n", "12", "--seed", "4", "--K", "1.5"]));
    let c2 = json(&sbp(&["count", "--n", "12", "--seed", "4", "--K", "1.5", "--method", "pruned"]));
    assert_eq!(c1["result"]["count"], c2["result"]["count"]);
    assert_eq!(c1["result"]["count"].as_u64().unwrap() % 2, 0);
}

#[test]
fn second_moment_and_free_energy() {
    let v = json(&sbp(&["second-moment", "--n", "200"]));
    let r = &v["result"];
    assert!((r["endpoint_plus"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(r["total"].as_f64().unwrap() <= 10.0);
    let v = json(&sbp(&["second-moment", "--K", "1", "--decay-n-list", "100,1000,10000"]));
    assert!(v["result"]["constant"].as_f64().unwrap() > 0.0);
    let v = json(&sbp(&["free-energy", "--K", "1", "--points", "11"]));
    assert_eq!(v["result"]["values"].as_array().unwrap().len(), 11);
}

#[test]
fn capacity_writes_trace_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let out = dir.path().join("trace.json");
    let status = sbp(&[
        "capacity", "--n", "12", "--seed", "3", "--overlap-samples", "10", "--csv",
        csv.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = v["result"]["capacity_rows"].as_u64().unwrap() as usize;
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("t,size,q_t,y_t\n"));
    assert_eq!(table.lines().count(), rows + 2);
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn experiment_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    // Same relative output path from two working directories, so the config echo matches.
    let run = |dir: &Path, threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_sbp"))
            .current_dir(dir)
            .args([
                "--threads", threads, "experiment", "--kind", "window", "--n-list", "10,12,14", "--trials", "40",
                "--seed", "8", "--out", "results",
            ])
            .env_remove("SOURCE_DATE_EPOCH")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let summary = run(a.path(), "1");
    run(b.path(), "3");
    assert_eq!(summary.lines().filter(|l| l.starts_with("n=")).count(), 3);
    let (a, b) = (a.path().join("results"), b.path().join("results"));
    assert!(read(&a, "window.csv") == read(&b, "window.csv"));
    assert!(read(&a, "window.json") == read(&b, "window.json"));
    let v: Value = serde_json::from_slice(&read(&a, "window.json")).unwrap();
    assert!(v["report"]["regression"]["slope"].is_f64());
    assert!(v["report"]["regression"]["ci_low"].is_f64());
    assert_eq!(v["config"]["seed"], 8);
    assert!(v["metadata"]["timestamp"].is_null());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sbp"))
        .args(["experiment", "--kind", "capacity", "--n-list", "8", "--trials", "5", "--seed", "2"])
        .env("SBP_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("capacity.csv").exists());
    assert!(dir.path().join("capacity.json").exists());
}

#[cfg(unix)]
#[test]
fn interrupt_flushes_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_sbp"))
        .args([
            "--threads", "1", "experiment", "--kind", "window", "--n-list", "22,24", "--trials", "100000",
            "--seed", "1", "--out", dir.path().to_str().unwrap(),
        ])
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    std::thread::sleep(std::time::Duration::from_millis(1500));
    let killed = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(130));
    let json: Value = serde_json::from_slice(&read(dir.path(), "window.json")).unwrap();
    assert_eq!(json["interrupted"], true);
    let rows = std::fs::read_to_string(dir.path().join("window.csv")).unwrap().lines().count();
    assert!(rows > 1 && rows < 100_001);
}
