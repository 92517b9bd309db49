use std::path::Path;
use std::process::Command;

fn lab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bpre-lab"));
    c.env("RUST_LOG", "warn");
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn missing_config_exits_with_two() {
    let out = lab().args(["theorem1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
    let out = lab().args(["theorem3", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"n_grid": [10]}"#);
    let out = lab().arg("theorem1").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = lab().arg("theorem2").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_runs_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab().args(["oracle", "--replicas", "2", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 24);
    assert!(dir.path().join("oracle.csv").exists());
    assert!(dir.path().join("oracle_verdicts.csv").exists());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 1, "experiment": "theorem1", "n_grid": [10, 20, 40, 80], "budget": {"samples": 20000}, "replicas": 3}"#,
    );
    let run = |sub: &str, seed: &str| {
        let out_dir = dir.path().join(sub);
        let out = lab().arg("theorem1").arg("--config").arg(&cfg).args(["--seed", seed, "--out"]).arg(&out_dir).output().unwrap();
        assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(out_dir.join("theorem1.csv")).unwrap()
    };
    let a = run("a", "99");
    let b = run("b", "99");
    let c = run("c", "100");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn json_output_carries_verdicts_and_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 2, "law": {"type": "two_point", "a": 0.6931471805599453, "w": 0.5}, "n_grid": [1, 2, 3],
            "budget": {"samples": 20000}, "replicas": 2}"#,
    );
    let out = lab().arg("oracle").arg("--config").arg(&cfg).args(["--format", "json", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert_eq!(v["experiment"], "oracle");
    assert_eq!(v["parameters"]["thresholds"]["z_max"], 3.0);
    assert_eq!(v["verdicts"].as_array().unwrap().len(), 6);
    assert!(v["wall_time_s"].as_f64().unwrap() >= 0.0);
    for row in v["rows"].as_array().unwrap() {
        assert!(row["n_samples"].as_u64().unwrap() > 0);
        assert!(row["stderr"].as_f64().is_some());
    }
}
