use std::process::Command;

fn membranes(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_membranes")).args(args).output().expect("binary runs")
}

#[test]
fn usage_errors_exit_with_two() {
    let out = membranes(&["solve", "--n", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--n"));
    let out = membranes(&["fixtures"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--category"));
}

#[test]
fn fixtures_write_a_stack_and_a_weiss_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = membranes(&["fixtures", "--category", "ii", "--angle", "-15", "--n", "33", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let w = summary["results"]["W_quadrature"].as_f64().unwrap();
    assert!((w - 3.0 * std::f64::consts::PI / 16.0).abs() < 1e-8);
    assert_eq!(summary["exit_code"], 0);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 9\nbc = \"example46-i\"\nN = 3\nforcing = [1.0, 0.0, -1.0]\n").unwrap();
    let out = membranes(&["solve", "--config", cfg.to_str().unwrap(), "--n", "17", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["n"], 17);
    assert_eq!(summary["results"]["converged"], true);
    for f in ["stack.csv", "stack.json", "energy.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "resolution = 9\n").unwrap();
    let out = membranes(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_for_one_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = membranes(&["verify", "--suite", "pava", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("violations.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().map(|a| a.len()), Some(0));
}
