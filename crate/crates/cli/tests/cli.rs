use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iscc-sim"))
        .args(args)
        .env_remove("ISCC_SIM_OUT")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn all_writes_three_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["all", "--config", smoke_config().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["sensing.csv", "network.csv", "control.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let m = manifest(dir.path());
    assert_eq!(m["subcommand"], "all");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["experiments"].as_array().unwrap().len(), 3);
    let header = std::fs::read_to_string(dir.path().join("network.csv")).unwrap();
    assert!(header.starts_with("protocol,node_count,trial,mean_accuracy,beacons_sent,"));
}

#[test]
fn seed_flag_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let ignored = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_iscc-sim"))
        .args(["control", "--config", smoke_config().to_str().unwrap(), "--seed", "9"])
        .args(["--out", ignored.path().to_str().unwrap()])
        .env("ISCC_SIM_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["seed"], 9);
    assert_eq!(m["control_seed"], 9);
    assert!(!ignored.path().join("manifest.json").exists());
}

#[test]
fn bad_config_exits_one_with_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\n[sensing]\ntrails = 3\n").unwrap();
    let out = sim(&["sense", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("trails") && err.contains(":3"), "{err}");
}

#[test]
fn failing_experiment_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    // valid, but one iteration cannot reach the goal
    std::fs::write(&cfg, "[control]\niterations = 1\nobstacle_radius_list = [30.0]\ntrials = 1\n").unwrap();
    let out = sim(&["control", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["experiments"][0]["status"], "error");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = sim(&["fly", "--config", "x.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fly"));
}
