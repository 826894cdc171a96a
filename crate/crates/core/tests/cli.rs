use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graddrop"))
}

#[test]
fn oracle_prints_the_sines_optimum() {
    let out = bin().args(["oracle", "sines"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("L* = 1.41331571"), "{text}");
    assert!(text.contains("x* = -0.67169"), "{text}");
}

#[test]
fn run_writes_to_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"problem": "sines", "methods": ["graddrop", "naive"], "trials": 3, "steps": 50}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", spec.to_str().unwrap(), "--workers", "2", "--trials-override", "2"])
        .env("GRADDROP_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trials = fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 2 * 2);
    let resolved = fs::read_to_string(out_dir.join("spec.resolved.json")).unwrap();
    assert!(resolved.contains("\"trials\": 2"));

    let flag_dir = dir.path().join("flag");
    let out = bin()
        .args(["run", spec.to_str().unwrap(), "--out", flag_dir.to_str().unwrap()])
        .env("GRADDROP_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(flag_dir.join("summary.csv").exists());
}

#[test]
fn bad_spec_exits_with_error_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    fs::write(&spec, "{\n  \"problem\": \"sines\",\n  \"methods\": [{\"kind\": \"graddrop\", \"leaks\": 1.5}]\n}").unwrap();
    let out = bin().args(["run", spec.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("bad.json"), "{err}");
}

#[test]
fn diverging_methods_give_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"problem": {"name": "quad_pair", "c": 1}, "methods": ["naive"], "trials": 2, "steps": 400,
            "schedule": {"kind": "constant", "lr": 2.0}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["run", spec.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let summary = fs::read_to_string(dir.path().join("o/summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().contains(",2,"), "{summary}");
}

#[test]
fn verify_runs_a_suite() {
    let out = bin().args(["verify", "--suite", "prop1", "--samples", "10000"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2, "{text}");
}
