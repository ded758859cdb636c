//! End-to-end tests that spawn the `pmoc` binary and check its exit
//! codes, console output, and the files it writes.

use std::path::Path;
use std::process::{Command, Output};

use pmoc_cli::report::BenchmarkReport;

fn pmoc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmoc"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn pmoc");
    assert!(
        output.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Fast fully-determined fixture: double integrator, fixed horizon.
fn point_mass_args<'a>(cmd: &'a mut Command, dir: &Path) -> &'a mut Command {
    cmd.args([
        "run",
        "--system",
        "pointmass",
        "--n",
        "8",
        "--tf-min",
        "1",
        "--tf-max",
        "1",
        "--out",
    ])
    .arg(dir)
}

#[test]
fn run_writes_report_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_ok(point_mass_args(&mut pmoc(), dir.path()));
    let stdout = stdout_of(&output);
    assert!(
        stdout.contains("run pointmass/pmoc/chebyshev N=8: status optimal"),
        "stdout: {stdout}"
    );

    let report = BenchmarkReport::load(&dir.path().join("report.jsonl")).unwrap();
    assert_eq!(report.record.status, "optimal");
    assert!((report.record.cost.unwrap() - 12.0).abs() < 1e-3);
    assert_eq!(report.record.t_f, Some(1.0));

    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,q1,v1,u1,p1"));
    assert_eq!(lines.count(), 512);
}

#[test]
fn export_reproduces_the_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(point_mass_args(&mut pmoc(), dir.path()));
    let original = std::fs::read(dir.path().join("trajectory.csv")).unwrap();

    let exported = dir.path().join("exported.csv");
    run_ok(
        pmoc()
            .arg("export")
            .arg("--report")
            .arg(dir.path().join("report.jsonl"))
            .arg("--out")
            .arg(&exported),
    );
    assert_eq!(std::fs::read(&exported).unwrap(), original);
}

#[test]
fn out_dir_env_var_sets_the_default_destination() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = pmoc();
    cmd.env("PMOC_OUT_DIR", dir.path());
    cmd.args([
        "run",
        "--system",
        "pointmass",
        "--n",
        "6",
        "--tf-min",
        "1",
        "--tf-max",
        "1",
    ]);
    run_ok(&mut cmd);
    assert!(dir.path().join("report.jsonl").exists());
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let output = pmoc().args(["run", "--no-such-flag"]).output().unwrap();
    assert_eq!(output.status.code(), Some(64));
}

#[test]
fn invalid_enum_value_is_a_usage_error() {
    let output = pmoc()
        .args(["run", "--system", "marsrover"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(64));
}

#[test]
fn run_rejects_multiple_schemes() {
    let output = pmoc()
        .args(["run", "--scheme", "pmoc", "--scheme", "ode-el"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(64));
}

#[test]
fn help_lists_the_subcommands() {
    let output = pmoc().arg("--help").output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    for subcommand in ["run", "compare", "verify", "export"] {
        assert!(stdout.contains(subcommand), "missing {subcommand}");
    }
}

#[test]
fn compare_prints_schemes_in_declared_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = pmoc();
    cmd.args([
        "compare",
        "--system",
        "pointmass",
        "--n",
        "6",
        "--tf-min",
        "1",
        "--tf-max",
        "1",
        "--scheme",
        "ode-el",
        "--scheme",
        "pmoc",
        "--out",
    ])
    .arg(dir.path());
    let output = run_ok(&mut cmd);
    let stdout = stdout_of(&output);

    // Rows come out in the declared scheme order even though the flags
    // listed ode-el first.
    let pmoc_pos = stdout.find("\npmoc").expect("pmoc row");
    let ode_pos = stdout.find("\node-el").expect("ode-el row");
    assert!(pmoc_pos < ode_pos, "stdout: {stdout}");

    assert!(dir.path().join("report-pmoc.jsonl").exists());
    assert!(dir.path().join("report-ode-el.jsonl").exists());
    assert!(dir.path().join("trajectory-pmoc.csv").exists());
    let table = std::fs::read_to_string(dir.path().join("compare.txt")).unwrap();
    assert!(table.contains("scheme"), "table: {table}");
}

#[test]
fn verify_convergence_writes_the_study_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = pmoc();
    cmd.args(["verify", "--study", "convergence", "--out"]).arg(dir.path());
    let output = run_ok(&mut cmd);
    let stdout = stdout_of(&output);
    assert!(stdout.contains("PASS convergence"), "stdout: {stdout}");

    let csv = std::fs::read_to_string(dir.path().join("study.csv")).unwrap();
    assert!(csv.starts_with("N,residual,defect,drift\n"), "csv: {csv}");
    // One row per grid size in the study.
    assert_eq!(csv.lines().count(), 6, "csv: {csv}");
}
