use std::fs;
use std::process::{Command, Output};

fn w4sv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_w4sv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn table_csv_layout() {
    let o = w4sv(&[
        "table",
        "--solver",
        "NR,dNR@0.5,Broyden@0.5,W4SV@0.5",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "problem,x0,NR@1,dNR@0.5,Broyden@0.5,W4SV@0.5");
    assert_eq!(lines.len(), 11);
    assert!(lines[1].starts_with("rosenbrock,\"(-1.2,1)\","));
    assert!(lines[4].starts_with("powell,\"(1,1)\",*,*,*,"));
}

#[test]
fn table_default_has_five_w4sv_columns() {
    let o = w4sv(&[
        "table",
        "--solver",
        "W4SV",
        "--max-iter",
        "2000",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("problem,x0,W4SV@1,W4SV@0.9,W4SV@0.8,W4SV@0.7,W4SV@0.5\n"));
    // A reduced cap is shown as ">N" rather than the 10⁶ marker.
    assert!(out.contains(">2000"));
}

#[test]
fn table_json_is_valid() {
    let o = w4sv(&["table", "--solver", "NR", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn empty_dtau_list_is_a_usage_error() {
    let o = w4sv(&["table", "--solver", "W4SV", "--dtau", ""]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dtau"));
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        &["run", "--problem", "nope"][..],
        &["run", "--problem", "powell", "--solver", "simplex"],
        &["run", "--problem", "powell", "--x0", "1"],
        &["run", "--problem", "powell", "--dtau", "1.5"],
        &["frobnicate"],
        &[],
    ] {
        assert_eq!(w4sv(args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(w4sv(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("powell.csv");
    let o = w4sv(&[
        "run",
        "--problem",
        "powell",
        "--x0",
        "0,1",
        "--dtau",
        "0.5",
        "--trace",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["status"], "Converged");
    let iterations = report["iterations"].as_u64().unwrap() as usize;
    let trace = fs::read_to_string(&path).unwrap();
    assert!(trace.starts_with("step,x,y,sigma_ratio,f_norm_sq,err_metric\n"));
    assert_eq!(trace.lines().count(), iterations + 2);
}

#[test]
fn negative_start_is_accepted() {
    let o = w4sv(&[
        "run",
        "--problem",
        "rosenbrock",
        "--x0",
        "-1.2,1",
        "--solver",
        "NR",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("status=Converged"));
}

#[test]
fn unwritable_trace_is_an_io_error() {
    let o = w4sv(&[
        "run",
        "--problem",
        "powell",
        "--trace",
        "/nonexistent-dir/trace.csv",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent-dir/trace.csv"));
}

#[test]
fn verify_passes() {
    let o = w4sv(&["verify", "--samples", "200"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}
