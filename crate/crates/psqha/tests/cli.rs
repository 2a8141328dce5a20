//! Integration tests for the `psqha` binary: exit codes, output files, and
//! byte-identical JSON for repeated runs of the same configuration.

use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psqha"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn identities_pass_and_write_report() {
    let dir = tempdir("identities");
    let out = run(&dir, &["identities", "--trials", "3", "--seed", "7"]);
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("identities.json").exists());
    assert!(dir.join("identities.meta.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempdir("determinism");
    let args = ["finite-check", "--d", "3", "--trials", "20", "--seed", "11"];
    assert!(run(&dir, &args).status.success());
    let first = std::fs::read(dir.join("finite_check.json")).unwrap();
    assert!(run(&dir, &args).status.success());
    let second = std::fs::read(dir.join("finite_check.json")).unwrap();
    assert_eq!(first, second, "JSON output must not depend on wall clock");
}

#[test]
fn transform_writes_table_and_csv() {
    let dir = tempdir("transform");
    let out = run(
        &dir,
        &["transform", "--state", "n=1", "--grid", "6,6,64,64", "--cutoff", "24"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("transform.json").exists());
}

#[test]
fn invalid_state_spec_exits_one() {
    let dir = tempdir("badstate");
    let out = run(&dir, &["transform", "--state", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_grid_exits_one() {
    let dir = tempdir("badgrid");
    let out = run(&dir, &["zeroset", "--grid", "12,12,100,100"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn counterexample_exits_clean() {
    let dir = tempdir("counterexample");
    let out = run(&dir, &["counterexample", "--eps", "0.05"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("counterexample.json")).unwrap()).unwrap();
    let sup = body["result"]["report"]["sup_density_diff"].as_f64().unwrap();
    assert!(sup <= 1e-6, "sup density diff {sup}");
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("psqha-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
