use std::process::{Command, Output};

use serde_json::Value;

fn qh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qh"))
        .args(args)
        .env_remove("QH_PRECISION_BITS")
        .output()
        .expect("qh runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).expect("valid json")
}

#[test]
fn poly_examples() {
    let o = qh(&[
        "poly", "--n", "2", "--q", "1/2", "--x", "1", "--format", "csv",
    ]);
    assert!(o.status.success());
    assert_eq!(csv_rows(&o)[0][2], "0");

    let o = qh(&[
        "poly", "--n", "0", "--q", "0.7", "--x", "3.2", "--format", "csv",
    ]);
    assert_eq!(csv_rows(&o)[0][2], "1");

    let o = qh(&[
        "poly", "--n", "1", "--q", "1/2", "--x", "2", "--kind", "psi", "--format", "csv",
    ]);
    assert_eq!(stdout(&o), "n,x,psi\n1,2,2\n");
}

#[test]
fn table_examples() {
    let o = qh(&[
        "table", "--what", "spectrum", "--q", "0.5", "--n-max", "2", "--format", "csv",
    ]);
    assert_eq!(stdout(&o), "n,value\n0,1\n1,7\n2,34\n");

    let o = qh(&[
        "table", "--what", "bn", "--q", "0.5", "--n-max", "1", "--format", "csv",
    ]);
    let rows = csv_rows(&o);
    assert_eq!(rows[0][1], "1");
    assert!(
        rows[1][1].starts_with("2.449489742783178098"),
        "{}",
        rows[1][1]
    );

    let o = qh(&[
        "table", "--what", "moments", "--q", "0.5", "--n-max", "2", "--format", "csv",
    ]);
    assert_eq!(stdout(&o), "n,value\n0,1\n1,1\n2,6\n");
}

#[test]
fn json_has_schema_version_and_round_trips() {
    let o = qh(&["table", "--what", "bn", "--n-max", "3"]);
    let v = json(&o);
    assert_eq!(v["schema_version"], 1);
    let s = v["rows"][2]["value"].as_str().unwrap();
    let parsed = rug::Float::with_val(256, rug::Float::parse(s).unwrap());
    let again = qosc::format::decimal(&parsed, 79);
    assert_eq!(again, s);
}

#[test]
fn verify_examples() {
    let o = qh(&[
        "verify",
        "--suite",
        "commutators",
        "--q",
        "0.5",
        "--dim",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["pass"], true);

    let o = qh(&["verify", "--suite", "moments", "--q", "0.5", "--n-max", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    for c in v["checks"].as_array().unwrap() {
        if c["id"] == "moment-closed-form" {
            assert!(c["residual"].as_f64().unwrap() < 1e-8);
        }
    }

    let o = qh(&["verify", "--suite", "qdiff", "--q", "1/2", "--n-max", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let entry = v["ledger"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["id"] == "qdiff-equation")
        .unwrap();
    assert!(entry["observed"]
        .as_str()
        .unwrap()
        .contains("n=1: 1/2*x^3 + 1i*x^2 + 1/2i"));
}

#[test]
fn every_report_carries_the_ledger() {
    let o = qh(&["verify", "--suite", "recurrence", "--n-max", "3"]);
    let v = json(&o);
    assert!(v["ledger"].as_array().unwrap().len() >= 5);
}

#[test]
fn verification_failure_exits_one() {
    let o = qh(&[
        "verify", "--suite", "moments", "--n-max", "3", "--tol", "1e-300",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["pass"], false);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(qh(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(qh(&["table", "--what", "bogus"]).status.code(), Some(2));
    let o = qh(&["poly", "--n", "1", "--x", "1", "--q", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(json(&o)["error"]["message"].is_string());
}

#[test]
fn numeric_errors_exit_three_with_json() {
    let o = qh(&["cs", "--z-re", "1.5", "--trunc", "10"]);
    assert_eq!(o.status.code(), Some(3));
    let v = json(&o);
    assert_eq!(v["error"]["kind"], "truncation");
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn coherent_state_report() {
    let o = qh(&["cs", "--z-re", "1", "--z-im", "-0.5", "--trunc", "60"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["rows"].as_array().unwrap().len(), 61);
    assert_eq!(v["within_bound"], true);
    assert!(v["residual_bound"].as_f64().unwrap() < 1e-30);
}

#[test]
fn measure_exports() {
    let o = qh(&[
        "measure",
        "--type",
        "jackson",
        "--q",
        "0.5",
        "--k-depth",
        "60",
        "--tail",
        "120",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("branch,exponent,support,weight\n"));
    assert!(!text.contains('\r'));
    assert_eq!(csv_rows(&o).len(), 61 + 121);

    let o = qh(&[
        "measure", "--type", "extremal", "--q", "0.5", "--bound", "10", "--format", "csv",
    ]);
    let rows = csv_rows(&o);
    assert_eq!(rows.len(), 4);
    assert!(rows[2][0].starts_with("0.87903921114983"));
}

#[test]
fn output_is_deterministic_and_honours_out() {
    let dir = std::env::temp_dir().join(format!("qh-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("a.json");
    let a = qh(&["verify", "--suite", "unity", "--out", p.to_str().unwrap()]);
    assert!(a.status.success());
    assert!(a.stdout.is_empty());
    let first = std::fs::read(&p).unwrap();
    let b = qh(&["verify", "--suite", "unity"]);
    assert_eq!(first, b.stdout);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn precision_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_qh"))
        .args(["table", "--what", "bn", "--n-max", "1"])
        .env("QH_PRECISION_BITS", "64")
        .output()
        .unwrap();
    assert_eq!(json(&o)["precision_bits"], 64);
}
