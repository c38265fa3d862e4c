use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_algebroid"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("test.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn report(out: &Path, task: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{task}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

const SO3: &str = "[algebroid g]\nkind = lie_algebra\npreset = so3\n\n[task axioms]\nkind = check\nalgebroid = g\n";

#[test]
fn so3_check_passes_with_zero_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SO3);
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("out"), "axioms");
    assert_eq!(r["passed"], true);
    assert_eq!(r["result"]["jacobi_residual"].as_f64(), Some(0.0));
    assert_eq!(r["task"]["kind"], "check");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn undefined_algebroid_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[task axioms]\nkind = check\nalgebroid = missing\n");
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing") && err.contains("task `axioms`"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn parse_error_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[chart p]\ncoords = x\nhalf: 2\n");
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SO3}\n[task again]\nkind = check\nalgebroid = g\nexpect = fail\n");
    let cfg = write_config(dir.path(), &text);
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&dir.path().join("out"), "axioms")["passed"], true);
    assert_eq!(report(&dir.path().join("out"), "again")["passed"], false);
}

#[test]
fn numerical_errors_become_failed_reports() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[chart p]\ncoords = x, y\nhalf = 1\n\
                [algebroid t]\nkind = tangent\nchart = p\n\
                [task escape]\nkind = flow\nalgebroid = t\nsection.1 = 10, 0\nx0 = 0, 0\nN = 16\n";
    let cfg = write_config(dir.path(), text);
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&dir.path().join("out"), "escape");
    assert_eq!(r["passed"], false);
    assert!(r["error"].as_str().unwrap().contains("leaves the chart"));
}

#[test]
fn overrides_apply_and_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(
        &example("area.cfg"),
        &out_dir,
        &["--set", "cube.disk.N=64", "--set", "seed=5"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out_dir, "area");
    assert_eq!(r["N"], 64);
    assert_eq!(r["seed"], 5);
    assert_eq!(r["overrides"][0], "cube.disk.N=64");
    let plain = tempfile::tempdir().unwrap();
    run(&example("area.cfg"), plain.path(), &[]);
    assert_ne!(report(plain.path(), "area")["config_hash"], r["config_hash"]);
}

#[test]
fn bad_override_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&example("area.cfg"), dir.path(), &["--set", "cube.nothing.N=3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn describe_lists_entities() {
    let out = bin().arg("describe").arg(example("area.cfg")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fibration  ext"), "{text}");
    assert!(text.contains("kernel rank 1"));
    assert!(text.contains("transgress: fibration ext, cube disk"));
}

#[test]
fn describe_handles_empty_and_malformed_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "# nothing here\n");
    let out = bin().arg("describe").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
    let cfg = write_config(dir.path(), "[cube\n");
    let out = bin().arg("describe").arg(&cfg).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    let out = bin().arg("describe").arg(dir.path().join("absent.cfg")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_s2_config_reports_four_pi() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&example("s2_monodromy.cfg"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "period");
    let v = r["result"]["periods"][0][0].as_f64().unwrap();
    assert!((v - 4.0 * std::f64::consts::PI).abs() < 2e-2, "{v}");
}

#[test]
fn report_keys_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SO3);
    run(&cfg, dir.path(), &[]);
    let text = std::fs::read_to_string(dir.path().join("axioms.json")).unwrap();
    let top: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \""))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = top.clone();
    sorted.sort();
    assert_eq!(top, sorted);
}
