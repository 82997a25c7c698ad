use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ezdeepc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ezdeepc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn init_writes_both_configs() {
    let dir = tempfile::tempdir().unwrap();
    let o = ezdeepc(&["init", "--out", "cfg"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let desk = fs::read_to_string(dir.path().join("cfg/desk4.toml")).unwrap();
    assert!(desk.contains("[controller]"));
    assert!(dir.path().join("cfg/full14.toml").exists());
}

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = ezdeepc(&["simulate", "--steps", "30", "--svg", "--out", "sim"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = fs::read_to_string(dir.path().join("sim/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 32);
    assert!(fs::read_to_string(dir.path().join("sim/levels.svg")).unwrap().starts_with("<svg"));
    let m = json(&dir.path().join("sim/manifest.json"));
    assert_eq!(m["command"], "simulate");
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"trajectory.csv") && outputs.contains(&"levels.svg"));
}

#[test]
fn simulate_rejects_inputs_with_the_wrong_width() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("u.csv"), "u_0,u_1\n1.0,2.0\n").unwrap();
    let o = ezdeepc(&["simulate", "--steps", "5", "--inputs", "u.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("columns"));
}

#[test]
fn synthetic_tuning_finds_the_known_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = ezdeepc(&["tune", "--synthetic", "--out", "bo"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = json(&dir.path().join("bo/tuning.json"));
    let a = t["alpha_star"].as_f64().unwrap();
    assert!((0.55..=0.65).contains(&a), "alpha* = {a}");
    let audit = fs::read_to_string(dir.path().join("bo/bo_audit.csv")).unwrap();
    assert_eq!(audit.lines().count(), t["evaluations"].as_u64().unwrap() as usize + 1);
}

#[test]
fn collect_then_control_runs_a_short_loop() {
    let dir = tempfile::tempdir().unwrap();
    let o = ezdeepc(&["collect", "--out", "col"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("persistently exciting"));
    let data = fs::read_to_string(dir.path().join("col/data.csv")).unwrap();
    assert!(data.lines().count() > 100);
    let o = ezdeepc(&["control", "--data", "col/data.csv", "--alpha", "0.5", "--steps", "10", "--out", "run"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.path().join("run/metrics.json"));
    assert_eq!(m["audit"]["dominance_violations"], 0);
    assert_eq!(m["audit"]["domain_violations"], 0);
    assert!(fs::read_to_string(dir.path().join("run/log.jsonl")).unwrap().lines().count() > 10);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ezdeepc(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(ezdeepc(&["control", "--mode", "tuned"], dir.path()).status.code(), Some(2));
    assert!(ezdeepc(&["--help"], dir.path()).status.success());
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = ezdeepc(&["simulate", "--config", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));
    let o = ezdeepc(&["control", "--alpha", "1.5", "--mode", "passive"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
