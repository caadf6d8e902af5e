use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_silo-dp"))
}

#[test]
fn missing_config_yields_json_error_record() {
    let out_dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args(["baseline", "--config", "/nonexistent/config.toml", "--seed", "1", "--out"])
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    let record: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(record["error"]["kind"], "io");
    assert_eq!(record["error"]["command"], "baseline");
}

#[test]
fn invalid_config_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n_splits = 0\n").unwrap();
    let output = bin()
        .args(["exp1", "--config"])
        .arg(&cfg)
        .args(["--seed", "3", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let record: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "configuration");
}

#[test]
fn audit_command_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("audit.toml");
    std::fs::write(&cfg, "[audit]\ntrials = 10000\n").unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["audit", "--config"])
        .arg(&cfg)
        .args(["--seed", "9", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["audit.csv", "audit_summary.json", "audit_summary.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("audit_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["results"]["all_as_expected"], true);
}
