//! End-to-end tests of the command-line surface: subcommands, file formats,
//! exit codes.

use std::process::Command;

fn campana() -> Command {
    Command::new(env!("CARGO_BIN_EXE_campana"))
}

fn stdout_of(cmd: &mut Command) -> String {
    let out = cmd.output().expect("command runs");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).expect("utf8 output")
}

#[test]
fn fan_collections() {
    let out = stdout_of(campana().args(["fan", "collections", "p2"]));
    assert_eq!(out.trim(), "{0,1,2}");
}

#[test]
fn fan_invariants() {
    let out = stdout_of(campana().args(["fan", "invariants", "p1xp1"]));
    assert!(out.contains("picard rank = 2"), "{}", out);
}

#[test]
fn fan_validate_rejects_broken_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.fan");
    // P^2 with one cone deleted: parses but is incomplete
    std::fs::write(
        &path,
        "dim = 2\nrays = [[1,0],[0,1],[-1,-1]]\nmax_cones = [[0,1],[1,2]]\nlabel = \"broken\"\n",
    )
    .unwrap();
    let out = campana()
        .args(["fan", "validate", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("complete=false"), "{}", text);
    assert!(text.contains("violation"), "{}", text);
}

#[test]
fn fan_emit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p2.fan");
    stdout_of(campana().args([
        "fan",
        "validate",
        "p2",
        "--out",
        path.to_str().unwrap(),
    ]));
    // the emitted file parses back and validates clean
    let out = stdout_of(campana().args(["fan", "validate", path.to_str().unwrap()]));
    assert!(out.contains("smooth=true complete=true"), "{}", out);
}

#[test]
fn series_moebius_pretty_and_dump() {
    let out = stdout_of(campana().args(["series", "moebius", "p2"]));
    assert!(out.contains("1 - T0·T1·T2"), "{}", out);
    assert!(out.contains("(1, 1, 1) := -1"), "{}", out);
}

#[test]
fn series_campana_moebius() {
    let out = stdout_of(campana().args([
        "series",
        "campana-moebius",
        "p1",
        "--m",
        "2,2",
        "--bound",
        "4",
    ]));
    assert!(out.contains("(2, 2) := -1"), "{}", out);
}

#[test]
fn series_euler_rational_dump() {
    let out = stdout_of(campana().args([
        "series", "euler", "p1", "--curve", "p1", "--q", "2", "--bound", "6",
    ]));
    // coefficient at (1,1) is q^1 (q+1) = 6
    assert!(out.contains("(1, 1) := 6"), "{}", out);
    assert!(out.contains("(3, 3) := 96"), "{}", out);
}

#[test]
fn count_p2_row() {
    let out = stdout_of(campana().args(["count", "--fan", "p2", "--q", "2", "--deg", "1,1,1"]));
    let mut lines = out.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("fan,curve,q,m,d,brute_count,predicted_count"));
    let row = lines.next().unwrap();
    assert!(row.contains(",24,24,"), "row: {}", row);
    assert!(row.contains("3/4"), "row: {}", row);
}

#[test]
fn count_campana_row() {
    let out = stdout_of(campana().args([
        "count", "--fan", "p1", "--q", "3", "--m", "2,2", "--deg", "2,2",
    ]));
    let row = out.lines().nth(1).unwrap();
    assert!(row.contains(",24,24,"), "row: {}", row);
}

#[test]
fn count_non_admissible_is_zero() {
    let out = stdout_of(campana().args(["count", "--fan", "p2", "--q", "2", "--deg", "1,2,1"]));
    let row = out.lines().nth(1).unwrap();
    assert!(row.contains(",0,0,"), "row: {}", row);
}

#[test]
fn count_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    stdout_of(campana().args([
        "count",
        "--fan",
        "p1",
        "--q",
        "2",
        "--diag",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4); // header + 3 rows
    let txt = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    let parsed: toml::Value = toml::from_str(&txt).unwrap();
    assert_eq!(parsed["row"].as_array().unwrap().len(), 3);
    assert!(parsed["meta"]["config_hash"].as_str().is_some());
}

#[test]
fn count_reports_are_reproducible() {
    let args = ["count", "--fan", "p2", "--q", "2", "--deg", "1,1,1", "--deg", "2,2,2"];
    let a = stdout_of(campana().args(args));
    let b = stdout_of(campana().args(args));
    assert_eq!(a, b);
    // and across parallelism settings
    let mut w1 = campana();
    w1.args(args).args(["--workers", "1"]);
    let mut w4 = campana();
    w4.args(args).args(["--workers", "4"]);
    assert_eq!(stdout_of(&mut w1), stdout_of(&mut w4));
}

#[test]
fn count_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("experiment.toml");
    std::fs::write(
        &cfg,
        r#"
fan = "p1"
curve = { genus = 1, numerator_coeffs = [1, 2, 2], label = "elliptic" }
q = [2]
m = [1, 1]
degrees = [[2, 2]]
bound = 6
"#,
    )
    .unwrap();
    let out = stdout_of(campana().args(["count", "--config", cfg.to_str().unwrap()]));
    let row = out.lines().nth(1).unwrap();
    assert!(row.starts_with("p1,elliptic,2,"), "row: {}", row);
}

#[test]
fn verify_classical_suite() {
    let out = stdout_of(campana().args(["verify", "classical-p1"]));
    assert!(out.contains("[PASS] classical-p1"), "{}", out);
    assert!(out.contains("1/1 criteria passed"), "{}", out);
}

#[test]
fn verify_small_budget_summary() {
    let out = stdout_of(campana().args(["verify", "moebius-laws", "--budget", "small"]));
    assert!(out.contains("[PASS]"), "{}", out);
}

#[test]
fn unknown_fan_is_config_error() {
    let out = campana()
        .args(["fan", "validate", "nonexistent-fan"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
