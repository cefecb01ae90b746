use std::process::Command;

use drift_cli::report::RunReport;

fn drift(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_drift")).args(args).output().unwrap()
}

#[test]
fn run_on_d1_reports_one_localized_event() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.txt");
    let out = drift(&["run", "--gen", "d1", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), stdout);
    let report = RunReport::parse(&stdout).unwrap();
    assert_eq!(report.events.len(), 1);
    assert!(report.events[0].flagged.iter().all(|&k| k < 2));
    assert_eq!((report.precision, report.recall), (Some(1.0), Some(1.0)));
    assert_eq!(report.events[0].statistics.len(), 3);
}

#[test]
fn bad_config_names_the_key_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k0.cfg");
    std::fs::write(&cfg, "n=600\nK=0\n").unwrap();
    let out = drift(&["run", "--config", cfg.to_str().unwrap(), "--gen", "d1"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("`K`"));
}

#[test]
fn gen_then_run_csv_with_truth_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d2.csv");
    let truth = dir.path().join("truth.txt");
    let out = drift(&[
        "gen", "--name", "d2", "--length", "1600", "--drifts", "800", "--seed", "3",
        "--out", csv.to_str().unwrap(), "--truth-out", truth.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&truth).unwrap(), "800\n");
    let out = drift(&[
        "run", "--csv", csv.to_str().unwrap(), "--truth", truth.to_str().unwrap(),
        "--set", "n=600", "--set", "K=50", "--occlusion",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = RunReport::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(report.config.contains(&("K".to_string(), "50".to_string())));
    assert_eq!(report.stream_length, 1600);
    assert!(report.recall.is_some());
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "f1,f2,label\n0.1,0.2,1\n0.1,abc,1\n").unwrap();
    let out = drift(&["run", "--csv", csv.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_suite_and_generator_fail() {
    assert!(!drift(&["bench", "--suite", "speed"]).status.success());
    assert!(!drift(&["run", "--gen", "nope"]).status.success());
    assert!(!drift(&["run"]).status.success());
}

#[test]
fn bench_detection_lists_the_roster() {
    let out = drift(&["bench", "--suite", "detection", "--seed", "1"]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    for name in ["sine", "sea", "mixed", "d1", "d2"] {
        assert!(table.lines().any(|l| l.starts_with(&format!("{name}\t"))), "{name} missing:\n{table}");
    }
}

#[test]
fn thread_cap_is_respected_and_validated() {
    let ok = Command::new(env!("CARGO_BIN_EXE_drift"))
        .args(["run", "--gen", "d2"])
        .env("DRIFT_THREADS", "1")
        .output()
        .unwrap();
    assert!(ok.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_drift"))
        .args(["run", "--gen", "d2"])
        .env("DRIFT_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
