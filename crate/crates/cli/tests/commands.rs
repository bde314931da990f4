//! End-to-end runs of the `phaseconj` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn phaseconj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phaseconj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("phaseconj-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Report printed on stdout (commands without primary stdout output).
fn stdout_report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report on stdout")
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name} in {report}"))
}

#[test]
fn table_csv_and_json() {
    let out = phaseconj(&["table", "--dmax", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "d,opt,universal,phase_est\n\
         2,1.000000000000000,0.666666666666667,0.750000000000000\n\
         3,0.666666666666667,0.500000000000000,0.555555555555556\n"
    );
    let out = phaseconj(&["table", "--dmax", "2", "--format", "json"]);
    let rows: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(rows[0]["opt"], 1.0);
    assert_eq!(phaseconj(&["table", "--dmax", "1"]).status.code(), Some(2));
}

#[test]
fn table_writes_file_and_report() {
    let csv = scratch("table.csv");
    let rep = scratch("table-report.json");
    let out = phaseconj(&[
        "table",
        "--dmax",
        "8",
        "--format",
        "csv",
        "--out",
        csv.to_str().unwrap(),
        "--report",
        rep.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 8);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["artifacts"][0], csv.to_str().unwrap());
}

#[test]
fn build_sources() {
    let path = scratch("qutrit.json");
    let out = phaseconj(&[
        "build",
        "--d",
        "3",
        "--canonical",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(file["d"], 3);
    assert_eq!(file["kraus"].as_array().unwrap().len(), 3);
    assert_eq!(file["nsb"][0][1], 0.5);

    let out = phaseconj(&["build", "--d", "4", "--p1", "0.2", "--p2", "0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let file: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(file["nsb"][0], serde_json::json!([0.0, 0.2, 0.3, 0.5]));

    let bad = scratch("bad.csv");
    std::fs::write(
        &bad,
        "0,0.5,0.2,0.2\n0.5,0,0.2,0.3\n0.2,0.2,0,0.5\n0.2,0.3,0.5,0\n",
    )
    .unwrap();
    let out = phaseconj(&["build", "--d", "4", "--nsb", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report = stdout_report(&out);
    assert!(report["error"].as_str().unwrap().contains("row 0"));

    assert_eq!(phaseconj(&["build", "--d", "4"]).status.code(), Some(2));
    assert_eq!(
        phaseconj(&["build", "--d", "3", "--p1", "0.2", "--p2", "0.3"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn verify_examples() {
    let out = phaseconj(&["verify", "--d", "5", "--seeds", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_report(&out);
    assert_eq!(report["passed"], true);
    assert!((report["data"]["fidelity"].as_f64().unwrap() - 0.4).abs() < 1e-12);

    let report = stdout_report(&phaseconj(&["verify", "--d", "2"]));
    assert_eq!(report["data"]["fidelity"], 1.0);
    assert_eq!(report["data"]["dilation"]["realization"], "unitary");
    let u = &report["data"]["unitary"]["data"];
    assert_eq!(u[1], serde_json::json!([1.0, 0.0]));
    assert_eq!(u[0], serde_json::json!([0.0, 0.0]));

    let asym = scratch("asym.csv");
    std::fs::write(
        &asym,
        "0,0.5,0.2,0.3\n0.4,0,0.3,0.2\n0.2,0.3,0,0.5\n0.3,0.2,0.5,0\n",
    )
    .unwrap();
    let out = phaseconj(&["verify", "--d", "4", "--nsb", asym.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report = stdout_report(&out);
    assert!(report["checks"].as_array().unwrap().is_empty());
}

#[test]
fn failing_check_exits_one() {
    // a tolerance no floating-point run can meet
    let out = phaseconj(&["--tol", "1e-30", "verify", "--d", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_report(&out)["passed"], false);
}

#[test]
fn oracle_examples() {
    for (d, value) in [("2", 1.0), ("3", 2.0 / 3.0), ("6", 1.0 / 3.0)] {
        let out = phaseconj(&["oracle", "--d", d]);
        assert_eq!(out.status.code(), Some(0));
        let report = stdout_report(&out);
        assert!((report["data"]["value"].as_f64().unwrap() - value).abs() < 1e-6);
        assert_eq!(check(&report, "singleton_weights")["pass"], true);
    }
    assert_eq!(phaseconj(&["oracle", "--d", "9"]).status.code(), Some(2));
}

#[test]
fn dilation_examples() {
    let out = phaseconj(&["dilation", "--d", "4", "--matching", "01,23"]);
    assert_eq!(out.status.code(), Some(0));
    let spec: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(spec["ancilla_dim"], 2);
    assert_eq!(spec["control_state"], Value::Null);
    let report: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(check(&report, "verify_dilation")["pass"], true);

    let path = scratch("controlled.json");
    let out = phaseconj(&[
        "dilation",
        "--d",
        "4",
        "--control",
        "--p",
        "0.2,0.3,0.5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_report(&out);
    assert_eq!(
        report["data"]["target_nsb"][0],
        serde_json::json!([0.0, 0.2, 0.3, 0.5])
    );
    let spec: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(spec["control_dim"], 3);

    let out = phaseconj(&[
        "dilation",
        "--d",
        "3",
        "--out",
        scratch("d3.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_report(&out);
    assert_eq!(report["data"]["ancilla_dim"], 3);
    assert_eq!(report["warnings"].as_array().unwrap().len(), 1);

    assert_eq!(
        phaseconj(&["dilation", "--d", "4", "--matching", "01,12"])
            .status
            .code(),
        Some(2)
    );
    let out = phaseconj(&["dilation", "--d", "4", "--control", "--p", "0.5,0.6,-0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn formula_check_is_diagnostic() {
    for d in ["2", "4", "6"] {
        let out = phaseconj(&["formula-check", "--d", d]);
        assert_eq!(out.status.code(), Some(0), "d = {d}");
        let report = stdout_report(&out);
        for entry in report["data"]["formula"].as_array().unwrap() {
            let k = entry["k"].as_u64().unwrap();
            assert_eq!(entry["unitary"], k % 2 == 1, "d = {d}, k = {k}");
        }
    }
    assert_eq!(
        phaseconj(&["formula-check", "--d", "5"]).status.code(),
        Some(2)
    );
}

#[test]
fn reports_are_deterministic() {
    let a = phaseconj(&["verify", "--d", "4", "--seeds", "5"]);
    let b = phaseconj(&["verify", "--d", "4", "--seeds", "5"]);
    assert_eq!(a.stdout, b.stdout);
    let c = phaseconj(&["--seed", "7", "verify", "--d", "4", "--seeds", "5"]);
    assert_eq!(stdout_report(&c)["parameters"]["seed"], 7);
}
