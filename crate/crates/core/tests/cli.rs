use std::fs;
use std::path::Path;
use std::process::Command;

use netnewton::cli::{Command as Sub, ExperimentSpec};

fn netnewton(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_netnewton")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn run_is_deterministic_under_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = |dir: &Path| {
        vec!["run".to_string(), "--n".into(), "30".into(), "--max-iters".into(), "80".into(), "--seed".into(), "7".into(), "--out".into(), dir.display().to_string()]
    };
    for dir in [&a, &b] {
        let args = args(dir);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(netnewton(&args).0, 0);
    }
    let (fa, fb) = (files(&a), files(&b));
    // spec.cfg records the output directory, which differs by construction.
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|(n, _)| n != "spec.cfg").collect::<Vec<_>>();
    let (fa, fb) = (strip(fa), strip(fb));
    assert_eq!(fa.len(), 4);
    assert_eq!(fa, fb);
    let header = String::from_utf8(fa[0].1.clone()).unwrap();
    assert!(header.starts_with("t,e_t,F,grad_inf,alpha,comm\n"));
}

#[test]
fn single_method_writes_one_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let (code, stdout) = netnewton(&["run", "--n", "20", "--max-iters", "30", "--methods", "nn", "--K", "0", "--out", &out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("NN-0"));
    let names: Vec<String> = files(tmp.path()).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, vec!["spec.cfg".to_string(), "trace_nn-0.csv".to_string()]);
}

#[test]
fn written_spec_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("first");
    let out_s = out.display().to_string();
    assert_eq!(netnewton(&["run", "--n", "12", "--max-iters", "20", "--alpha", "0.015", "--out", &out_s]).0, 0);
    let cfg = fs::read_to_string(out.join("spec.cfg")).unwrap();
    let spec = ExperimentSpec::from_config_str(&cfg).unwrap();
    assert_eq!(spec.command, Sub::Run);
    assert_eq!(spec.n, 12);
    assert_eq!(spec.alpha, 0.015);

    let again = tmp.path().join("again");
    let cfg_path = out.join("spec.cfg").display().to_string();
    let again_s = again.display().to_string();
    assert_eq!(netnewton(&["run", "--config", &cfg_path, "--out", &again_s]).0, 0);
    assert_eq!(fs::read(out.join("trace_nn-2.csv")).unwrap(), fs::read(again.join("trace_nn-2.csv")).unwrap());
}

#[test]
fn histogram_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let (code, stdout) = netnewton(&["histogram", "--trials", "3", "--n", "30", "--max-iters", "3000", "--out", &out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("censored"));
    let csv = fs::read_to_string(tmp.path().join("histogram.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("trial,method,d,exchanges,censored"));
    assert_eq!(lines.count(), 12);
    assert!(tmp.path().join("histogram_means.csv").exists());
}

#[test]
fn analyze_reports_and_flags_broken_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good").display().to_string();
    let (code, _) = netnewton(&["analyze", "--n", "10", "--p", "4", "--K", "2", "--out", &good]);
    assert_eq!(code, 0);
    let report = fs::read_to_string(tmp.path().join("good").join("report_K2.csv")).unwrap();
    for key in ["# rho =", "# lambda =", "# Lambda =", "# zeta =", "# epsilon_theory ="] {
        assert!(report.contains(key), "missing {key}");
    }
    assert!(report.contains("bound,theoretical,measured,margin,pass"));
    assert!(!report.lines().filter(|l| !l.starts_with('#')).skip(1).any(|l| l.ends_with(",0")));

    let bad = tmp.path().join("bad").display().to_string();
    let (code, stdout) = netnewton(&["analyze", "--break-weights", "--out", &bad]);
    assert_ne!(code, 0);
    assert!(stdout.contains("row sum != 1 at row 0"));
    assert!(tmp.path().join("bad").join("report.csv").exists());
}

#[test]
fn logistic_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let (code, stdout) = netnewton(&["logistic", "--n", "10", "--q", "10", "--max-iters", "30", "--out", &out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("final F"));
    assert!(tmp.path().join("logistic_dgd.csv").exists());
}

#[test]
fn divergence_and_bad_input_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    // DGD with alpha = 1 overshoots the stiffest local curvature.
    let (code, stdout) = netnewton(&["run", "--methods", "dgd", "--alpha", "1", "--n", "20", "--max-iters", "200", "--out", &out]);
    assert_eq!(code, 2);
    assert!(stdout.contains("failed"));
    assert_eq!(netnewton(&["run", "--d", "3", "--out", &out]).0, 1);
    assert_eq!(netnewton(&["run", "--config", "/nonexistent/file.cfg"]).0, 1);
    assert_eq!(netnewton(&["run", "--help"]).0, 0);
}
