//! Runs the `binq4` binary: outputs, config handling, exit codes and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn binq4(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binq4")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON report")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("binq4-cli-test-{}-{name}", std::process::id()))
}

#[test]
fn sn_unit_instance_has_four_rows() {
    let o = binq4(&["sn", "--q", "1,0,1", "--p", "3", "--n", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x0\tX1\tX2\tX3\tX4\tfiber_id"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split('\t').count() == 6));
    assert!(rows.contains(&"0\t2\t0\t0\t2\t2"));
}

#[test]
fn thm13_reports_unmet_hypotheses() {
    let o = binq4(&["thm13", "--q", "1,0,1", "--p1", "3", "--p2", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["hypotheses_met"], serde_json::json!(false));
    assert_eq!(v["r_q_form"], serde_json::json!(48));
    assert!(v["normalization"].as_str().unwrap().contains("Aut"));
}

#[test]
fn config_file_with_flag_override() {
    let path = temp_path("config.json");
    std::fs::write(&path, r#"{"q": "1,0,1", "p": "5", "n": "1", "format": "json"}"#).unwrap();
    let from_file = json(&binq4(&["sn", "--config", path.to_str().unwrap()]));
    assert_eq!(from_file["statistics"]["p"], serde_json::json!(5));
    let overridden = json(&binq4(&["sn", "--config", path.to_str().unwrap(), "--p", "3"]));
    assert_eq!(overridden["statistics"]["p"], serde_json::json!(3));
    assert_eq!(overridden["statistics"]["count"], serde_json::json!(4));
    assert!(overridden["metrics"].as_array().unwrap().iter().all(|m| m["definition"].is_string()));
    std::fs::write(&path, r#"{"q": "1,0,1", "p": 5}"#).unwrap();
    assert_eq!(binq4(&["sn", "--config", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn exit_codes() {
    assert_eq!(binq4(&["sn", "--q", "1,0,1", "--p", "4"]).status.code(), Some(2));
    assert_eq!(binq4(&["sn", "--q", "1,0,1"]).status.code(), Some(2));
    assert_eq!(binq4(&["reps", "--q", "1,3,1"]).status.code(), Some(2));
    assert_eq!(binq4(&["genus", "--gram2", "2,0,0,0;0,2,0,0;0,0,2,0;0,0,0,18", "--p", "3"]).status.code(), Some(2));
    assert_eq!(binq4(&["nosuch"]).status.code(), Some(2));
    let budget = binq4(&["sn", "--q", "1,0,1", "--p", "3", "--node_budget", "1"]);
    assert_eq!(budget.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&budget.stderr).contains("budget"));
    let closure = binq4(&["genus", "--gram2", "2,0,0,0;0,2,0,0;0,0,2,0;0,0,0,18", "--p", "5", "--class_budget", "1"]);
    assert_eq!(closure.status.code(), Some(3));
    assert_eq!(binq4(&["--help"]).status.code(), Some(0));
}

#[test]
fn thread_cap_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_binq4")).env("BINQ4_THREADS", threads).args(["xn", "--q", "3,2,82", "--p", "3"]).output().unwrap()
    };
    let one = run("1");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, run("2").stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn reports_are_reproducible_and_written_to_out() {
    let args = ["fibers", "--q", "5,2,90", "--p", "3", "--fiber_curves", "true"];
    let a = binq4(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, binq4(&args).stdout);
    let v = json(&a);
    assert!(v["fibers"].as_array().unwrap().iter().all(|f| f["violations"].as_array().unwrap().is_empty()));
    let path = temp_path("fibers.json");
    let b = binq4(&[&args[..], &["--out", path.to_str().unwrap()]].concat());
    assert_eq!(b.status.code(), Some(0));
    assert!(b.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn curve_counters_agree() {
    let o = binq4(&["curve", "--curve", "x^2 - 2*y^2 - 1", "--bx", "2000", "--method", "both", "--list", "true"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["agree"], serde_json::json!(true));
    assert_eq!(v["point_list"].as_array().unwrap().len() as u64, v["points"].as_u64().unwrap());
    assert_eq!(binq4(&["curve", "--curve", "x^2 - y^2", "--bx", "10", "--method", "fast"]).status.code(), Some(2));
}

#[test]
fn genus_and_reps_reports() {
    let g = json(&binq4(&["genus", "--p", "3"]));
    assert_eq!(g["classes"].as_array().unwrap().len(), 1);
    assert_eq!(g["classes"][0]["autOrder"], serde_json::json!(384));
    let r = json(&binq4(&["reps", "--q", "1,0,1", "--list", "true"]));
    assert_eq!(r["representations"].as_array().unwrap().len(), 48);
    let t = json(&binq4(&["thm13", "--q", "1,0,2", "--p1", "5", "--p2", "7", "--max_four_d", "100"]));
    assert!(t["family_scan"]["forms_scanned"].as_u64().unwrap() > 0);
}
