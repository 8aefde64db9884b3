use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn ncp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env("NCP_THREADS", "1")
        .output()
        .expect("ncp runs")
}

fn config(alpha: f64, eps: f64) -> Value {
    json!({
        "model": {"name": "linear_test", "params": {"dim": 2.0, "a": 0.5, "u_max": 2.0}},
        "norm": {"kind": "max", "weights": [1.0, 1.0]},
        "region": {"kind": "box", "lower": [-2.0, -2.0], "upper": [2.0, 2.0]},
        "synthesis": {
            "alpha": alpha, "tau_max": 1.0, "eps": eps, "dt": 0.05,
            "grid": {"mode": "fraction", "initial_radius_fraction": 0.3},
            "search": {"rollouts": 32, "iterations": 8, "seed": 5},
            "seed": 9
        }
    })
}

fn write_config(dir: &Path, cfg: &Value) -> String {
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn synth_into(dir: &TempDir, name: &str) -> String {
    let cfg = write_config(dir.path(), &config(0.05, 0.1));
    let out_dir = dir.path().join(name);
    let out = ncp(&["synth", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    out_dir.to_string_lossy().into_owned()
}

#[test]
fn synth_writes_every_artifact() {
    let dir = TempDir::new().unwrap();
    let out = synth_into(&dir, "run");
    for name in ["assignments.json", "certificate.json", "report.json", "config.json", "manifest.json"] {
        assert!(Path::new(&out).join(name).is_file(), "{name} missing");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    let names: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let at = names.iter().position(|n| *n == "assignments.json").unwrap();
    let hash = manifest["artifact_hashes"][at].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    let copied = fs::read_to_string(Path::new(&out).join("config.json")).unwrap();
    assert_eq!(copied, fs::read_to_string(dir.path().join("run.json")).unwrap());
}

#[test]
fn reruns_produce_identical_artifacts() {
    let dir = TempDir::new().unwrap();
    let a = synth_into(&dir, "a");
    let b = synth_into(&dir, "b");
    for name in ["assignments.json", "certificate.json", "report.json"] {
        let read = |d: &str| fs::read(Path::new(d).join(name)).unwrap();
        assert!(read(&a) == read(&b), "{name} differs between reruns");
    }
}

#[test]
fn bad_configs_exit_with_one_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &config(0.0, 0.1));
    let out = ncp(&["synth", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));

    let cfg = write_config(dir.path(), &config(0.05, 5.0));
    let out = ncp(&["synth", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("eps"), "{}", stderr(&out));
}

#[test]
fn simulate_and_report_accept_a_synthesized_set() {
    let dir = TempDir::new().unwrap();
    let run = synth_into(&dir, "run");
    let assignments = format!("{run}/assignments.json");
    let sim = dir.path().join("sim");
    let out = ncp(&[
        "simulate",
        "--assignments",
        &assignments,
        "--grid-starts",
        "8",
        "--horizon",
        "10",
        "--out-dir",
        sim.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let trajectories = fs::read_dir(&sim).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().starts_with("traj_")
    });
    assert_eq!(trajectories.count(), 8);
    let summary = fs::read_to_string(sim.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 9);
    assert!(summary.starts_with("id,x0_0,x0_1,max_violation,time_to_c_ball,final_distance"));

    let out = ncp(&["report", &run]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("lambda"));
}

#[test]
fn expand_rejects_overlap_and_grows_a_disjoint_strip() {
    let dir = TempDir::new().unwrap();
    let run = synth_into(&dir, "run");
    let assignments = format!("{run}/assignments.json");
    let cfg = dir.path().join("run.json");
    let expand = |region: &str, name: &str| {
        let out_dir = dir.path().join(name);
        ncp(&[
            "expand",
            "--assignments",
            &assignments,
            "--region",
            region,
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
    };
    let out = expand(r#"{"kind": "box", "lower": [-2.0, 1.0], "upper": [2.0, 3.0]}"#, "overlap");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("overlap"), "{}", stderr(&out));

    let out = expand(r#"{"kind": "box", "lower": [-2.0, 2.0], "upper": [2.0, 2.5]}"#, "grown");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("grown/report.json")).unwrap()).unwrap();
    assert!(report["triples_after"].as_u64() > report["triples_before"].as_u64());
}

#[test]
fn refuses_to_write_over_its_inputs() {
    let dir = TempDir::new().unwrap();
    let run = synth_into(&dir, "run");
    let cfg = dir.path().join("run.json");
    let out = ncp(&[
        "refine",
        "--assignments",
        &format!("{run}/assignments.json"),
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        &run,
    ]);
    assert_eq!(out.status.code(), Some(1));
}
