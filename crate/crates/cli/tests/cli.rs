use serde_json::Value;
use std::process::{Command, Output};

fn opsys(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opsys"))
        .args(args)
        .output()
        .expect("failed to launch opsys")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is not a JSON report")
}

#[test]
fn lemma0_passes_with_positive_margin() {
    let out = opsys(&["lemma0", "--degree", "4", "--budget", "2000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["pass"], Value::Bool(true));
    assert_eq!(r["command"], "lemma0");
    assert_eq!(r["results"]["N"], 4);
    let margin = r["results"]["range"]["margin"].as_f64().unwrap();
    let h = r["results"]["range"]["max_support"].as_f64().unwrap();
    assert!(margin > 0.0);
    assert!((h - (std::f64::consts::PI / 6.0).cos()).abs() <= 1e-9);
}

#[test]
fn out_of_range_coupling_is_a_usage_error() {
    let out = opsys(&["lemma1", "--c", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage error"));
    let out = opsys(&["moments", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = opsys(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn closed_form_integral_is_two() {
    let out = opsys(&["integral", "--method", "closed-form"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let value = r["results"]["integrals"][0]["value"].as_f64().unwrap();
    assert_eq!(value, 2.0);
    assert!(r["runtime_ms"].is_null());
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "sweep", "--tuple", "tilde", "--degree", "3", "--budget", "100", "--seed", "5",
    ];
    let first = opsys(&args);
    let second = opsys(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn sweep_csv_has_one_row_per_sample_and_step() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let args = [
        "sweep", "--tuple", "coupled", "--degree", "3", "--budget", "150", "--seed", "3",
    ];
    let mut with_out = args.to_vec();
    with_out.extend(["--format", "csv", "--out", csv.to_str().unwrap()]);
    let out = opsys(&with_out);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    let r = report(&opsys(&args));
    let samples = r["results"]["samples"].as_u64().unwrap();
    let steps = r["results"]["refinement_steps"].as_u64().unwrap();
    assert_eq!(samples, 150);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "theta_1,theta_2,theta_3,theta_4,h,margin"
    );
    assert_eq!(lines.count() as u64, samples + steps);
}

#[test]
fn failing_check_still_reports_in_full() {
    let out = opsys(&[
        "sweep", "--tuple", "coupled", "--c", "3", "--degree", "3", "--budget", "20",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["pass"], Value::Bool(false));
    assert!(r["results"]["max_support"].as_f64().unwrap() > 1.0);
    assert!(r["results"]["margin"].as_f64().unwrap() < 0.0);
    assert_eq!(r["params"]["c"].as_f64().unwrap(), 3.0);
}

#[test]
fn threshold_reports_the_truncated_crossing() {
    let out = opsys(&["threshold", "--degree", "4", "--tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let c_star = r["results"]["c_star"].as_f64().unwrap();
    assert!((c_star - (6.0f64 / 10.0).sqrt()).abs() <= 1e-8);
    let out = opsys(&["threshold", "--degree", "4", "--c-lo", "2", "--c-hi", "3"]);
    assert_eq!(out.status.code(), Some(1));
}
