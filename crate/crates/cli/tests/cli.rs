//! End-to-end runs of the binary against the shipped models.
//!
//! Golden files live in `tests/golden`; set `UPDATE_GOLDEN=1` to rewrite them.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn model(name: &str) -> String {
    root().join("models").join(format!("{name}.json")).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signstab")).args(args).output().unwrap()
}

fn run_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signstab")).args(args).env("RAYON_NUM_THREADS", threads).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}; run with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(actual, expected, "{name} differs from golden output");
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn check_example1_is_admissible() {
    let o = run(&["check", "--input", &model("example1")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("sign pattern admissible"));
    golden("check_example1.txt", &stdout(&o));
}

#[test]
fn check_ring_prints_cycle() {
    let o = run(&["check", "--input", &model("ring3")]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.contains("cycle: x1 -> x2 -> x3 -> x1"), "{out}");
    assert!(out.contains("sign pattern not admissible"));
    golden("check_ring3.txt", &out);
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"f": ["-x1 +"], "region": {"x": [[-1, 1]], "t": [0, 1]}}"#).unwrap();
    for sub in ["check", "verify", "delay"] {
        let o = run(&[sub, "--input", bad.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{sub}");
        assert!(stderr(&o).contains("f1: "), "{}", stderr(&o));
    }
    let o = run(&["verify", "--input", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(&["verify"])), 2);
    assert_eq!(code(&run(&["verify", "--input", &model("example1"), "--samples", "1"])), 2);
}

#[test]
fn verify_example1_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["verify", "--input", &model("example1"), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stderr(&o).trim(), "sign-stable");
    let text = std::fs::read_to_string(&out).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["sign_stable"], true);
    assert_eq!(v["constant_asymmetry_shortcut"], true);
    assert_eq!(v["sampling"]["samples"], 256);
    assert_eq!(v["sampling"]["seed"], 42);
    golden("verify_example1.json", &text);
}

#[test]
fn verify_example1_text() {
    let o = run(&["verify", "--input", &model("example1")]);
    assert_eq!(code(&o), 0);
    golden("verify_example1.txt", &stdout(&o));
}

#[test]
fn verify_periodic_asymmetry_reports_rate_witness() {
    let o = run(&["verify", "--input", &model("example4_alpha005"), "--format", "json"]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["failed"], serde_json::json!(["condition (ii)"]));
    let nodes = v["conditions"]["ii"]["nodes"].as_array().unwrap();
    assert!(nodes.iter().any(|n| n["satisfied"] == false && n["point"]["t"].is_number()));
}

#[test]
fn verify_other_models() {
    for (name, expected) in [
        ("block_identity", 0),
        ("mutual_activation", 1),
        ("ring3", 1),
        ("fig1d", 0),
        ("cascade", 0),
        ("state_dependent", 0),
        ("example4_alpha11", 0),
    ] {
        let o = run(&["verify", "--input", &model(name)]);
        assert_eq!(code(&o), expected, "{name}: {}", stdout(&o));
    }
}

#[test]
fn region_override_changes_the_verdict() {
    // the self rate of x1 is 1 + x2, negative once x2 < -1
    let o = run(&["verify", "--input", &model("example1"), "--region", "-2,3"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stdout(&o).contains("FAILED"));
    assert_eq!(code(&run(&["verify", "--input", &model("example1"), "--region", "1"])), 2);
}

#[test]
fn json_is_identical_across_thread_counts() {
    let args = ["verify", "--input", &model("example1"), "--format", "json"];
    let one = run_with_threads(&args, "1");
    let four = run_with_threads(&args, "4");
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    assert_eq!(one.stdout, run(&seq).stdout);
}

#[test]
fn sweep_reproduces_periodic_verdicts() {
    let o = run(&["simulate", "--sweep", "--alphas", "0.05,0.09", "--omegas", "0.5,1,1.1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("alpha,omega,verdict,final_norm\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let (alpha, omega) = (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap());
        let expected = if alpha == 0.05 && omega == 1.0 { "unstable" } else { "stable" };
        assert_eq!(r[2], expected, "alpha {alpha} omega {omega}");
    }
}

#[test]
fn simulate_example1_decays() {
    let o = run(&["simulate", "--input", &model("example1"), "--t-end", "20", "--compare", "0.2,0.1,0.4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("contraction rate"));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2001);
    let norm = |r: &Vec<String>| r[1..].iter().map(|v| v.parse::<f64>().unwrap().powi(2)).sum::<f64>().sqrt();
    assert!(norm(&rows[2000]) < 1e-3 * norm(&rows[0]));
}

#[test]
fn simulate_delayed_lti_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = run(&["simulate", "--input", &model("lti_delay"), "--t-end", "200", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&std::fs::read_to_string(&out).unwrap());
    let last = rows.last().unwrap();
    assert_eq!(last[0].parse::<f64>().unwrap(), 200.0);
    assert!(last[1..].iter().all(|v| v.parse::<f64>().unwrap().abs() < 1e-3), "{last:?}");

    let o = run(&["simulate", "--input", &model("example1"), "--delays", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no delayed edges"));
}

#[test]
fn delay_certificate_exit_codes() {
    let o = run(&["delay", "--input", &model("lti_delay")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    golden("delay_lti.txt", &stdout(&o));

    let o = run(&["delay", "--input", &model("lti_delay_slow")]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("not satisfied"));

    let o = run(&["delay", "--input", &model("example1")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("\"delays\""), "{}", stderr(&o));
}

#[test]
fn verify_attaches_delay_certificate() {
    let o = run(&["verify", "--input", &model("lti_delay"), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["delay"]["satisfied"], true);
}
