use std::path::Path;
use std::process::{Command, Output};

use varmech_cli::checks::{run_checks, Fixture, REQUIRED_CATALOG};
use varmech_cli::Table;

fn varmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varmech"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_problem(dir: &Path, text: &str) -> String {
    let path = dir.join("problem.txt");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sho_catalog_run_tracks_cosine() {
    let out = varmech(&["run", "--catalog", "sho"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = Table::read(out.stdout.as_slice()).unwrap();
    assert_eq!(table.header, ["t", "q1", "y1"]);
    assert_eq!(table.rows.last().unwrap()[0], 10.0);
    let worst = table.rows.iter().map(|r| (r[1] - r[0].cos()).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("lagrangian rows=10001"));
}

#[test]
fn martinet_summary_reports_constant_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("martinet.csv");
    let out = varmech(&["run", "--catalog", "martinet", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let summary = String::from_utf8(out.stdout).unwrap();
    let drift: f64 = summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("mu3_drift="))
        .expect("summary has mu3_drift")
        .parse()
        .unwrap();
    assert!(drift <= 1e-9, "{summary}");
    let table = Table::read(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 1001);
}

#[test]
fn invalid_expression_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_problem(
        dir.path(),
        "kind = lagrangian\nn = 1\nL = 0.5*y1^2 - q1 +\nq0 = 1\ny0 = 0\nt1 = 1\n",
    );
    let out = varmech(&["run", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3, column"), "{err}");
}

#[test]
fn undeclared_variable_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_problem(
        dir.path(),
        "kind = lagrangian\nn = 1\nL = 0.5*y1^2 - q2\nq0 = 1\ny0 = 0\nt1 = 1\n",
    );
    let out = varmech(&["run", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("q2 is not defined"));
}

#[test]
fn degenerate_lagrangian_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_problem(
        dir.path(),
        "kind = lagrangian\nn = 1\nL = y1 - q1^2\nq0 = 1\ny0 = 0\nt1 = 1\n",
    );
    let out = varmech(&["run", &path]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_catalog_name_exits_2() {
    assert_eq!(varmech(&["run", "--catalog", "nope"]).status.code(), Some(2));
}

#[test]
fn overrides_change_the_grid() {
    let out = varmech(&["run", "--catalog", "discrete_sho", "--steps", "10"]);
    assert!(out.status.success());
    let table = Table::read(out.stdout.as_slice()).unwrap();
    assert_eq!(table.header[0], "k");
    assert_eq!(table.rows.len(), 12);
}

#[test]
fn check_with_unmatched_filter_runs_nothing() {
    let out = varmech(&["check", "--only", "nomatch"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "0 checks, 0 failed");
}

#[test]
fn check_filter_selects_by_substring() {
    let out = varmech(&["check", "--only", "numerics/"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{text}");
}

#[test]
fn flipped_structure_sign_is_caught() {
    let fx = Fixture {
        flip_structure_sign: true,
    };
    let report = run_checks(Some("euler-poincare-lie-poisson"), &fx);
    assert_eq!(report.len(), 1);
    assert!(!report[0].passed, "{}", report[0].detail);
}

#[test]
fn csv_file_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let out = varmech(&["run", "--catalog", "pendulum", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let table = Table::read(text.as_bytes()).unwrap();
    assert_eq!(table.to_csv_string(), text);
}

#[test]
fn list_names_every_required_example() {
    let out = varmech(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    for name in REQUIRED_CATALOG {
        assert!(names.contains(&name), "{name} missing from list");
    }
}

#[test]
fn every_catalog_problem_runs() {
    for name in varmech_cli::catalog::names() {
        let out = varmech(&["run", "--catalog", name]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
