use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = "samples = 300\nvalidation_samples = 300\nmpc_runs = 2\nmpc_steps = 10\nmax_iters = 2\n";

fn tubeid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tubeid"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    o
}

#[test]
fn missing_dataset_is_a_bad_input_error() {
    let tmp = TempDir::new().unwrap();
    let out = tubeid(tmp.path(), &["run", "--stage", "synthesize"]);
    assert_eq!(out.status.code(), Some(4));
    let msg = stderr(&out);
    assert!(msg.contains("synthesize") && msg.contains("missing input"), "{msg}");
}

#[test]
fn report_needs_synthesis_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = tubeid(tmp.path(), &["report"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("report"));
}

#[test]
fn malformed_invocations_are_bad_input() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(tubeid(tmp.path(), &["synthesize", "--no-such-flag"]).status.code(), Some(4));
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "theta = -1.0\n").unwrap();
    let out = tubeid(tmp.path(), &["--config", cfg.to_str().unwrap(), "gen-data"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("config"));
    assert_eq!(tubeid(tmp.path(), &["run", "--stage", "config"]).status.code(), Some(4));
}

#[test]
fn stage_init_stops_after_the_init_artifact() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let c = cfg.to_str().unwrap();
    ok(tubeid(tmp.path(), &["--config", c, "run", "--stage", "gen-data"]));
    ok(tubeid(tmp.path(), &["--config", c, "run", "--stage", "init"]));
    assert!(tmp.path().join("init.json").exists());
    assert!(!tmp.path().join("synth_adaptive.json").exists());
    assert!(!tmp.path().join("table.md").exists());

    // adaptive only gives a two-row table
    ok(tubeid(tmp.path(), &["--config", c, "synthesize"]));
    ok(tubeid(tmp.path(), &["--config", c, "report"]));
    let table = std::fs::read_to_string(tmp.path().join("table.csv")).unwrap();
    let runs: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(runs, ["Initial", "Adapt"]);
    for f in ["vertices_X.csv", "vertices_tube_initial.csv", "vertices_terminal_adaptive.csv", "report.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}

#[test]
fn seed_mismatch_between_artifacts_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let c = cfg.to_str().unwrap();
    ok(tubeid(tmp.path(), &["--config", c, "gen-data"]));
    let out = tubeid(tmp.path(), &["--config", c, "--seed", "9", "init"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("seed"));
}

/// Drop wall-clock fields so runs can be compared exactly.
fn strip_times(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("solve_time");
            m.values_mut().for_each(strip_times);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_times),
        _ => {}
    }
}

fn json(p: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    strip_times(&mut v);
    v
}

fn csv_without_time(p: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(p).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| header[i] != "time").collect();
    text.lines()
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            keep.iter().map(|&i| cells[i]).collect::<Vec<_>>().join(",")
        })
        .collect()
}

#[test]
fn same_seed_reproduces_every_artifact() {
    let root = TempDir::new().unwrap();
    let cfg = small_config(root.path());
    let c = cfg.to_str().unwrap();
    let dirs = [root.path().join("a"), root.path().join("b")];
    for d in &dirs {
        ok(tubeid(d, &["--config", c, "run"]));
    }
    let (a, b) = (&dirs[0], &dirs[1]);
    let mut names: Vec<String> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "synth_fixed.json") && names.iter().any(|n| n == "traj_01.csv"));
    for n in &names {
        let (pa, pb) = (a.join(n), b.join(n));
        if n.starts_with("iterations_") {
            assert_eq!(csv_without_time(&pa), csv_without_time(&pb), "{n}");
        } else if n.ends_with(".json") {
            assert_eq!(json(&pa), json(&pb), "{n}");
        } else {
            assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap(), "{n}");
        }
    }
}
