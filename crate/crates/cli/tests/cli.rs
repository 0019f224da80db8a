use std::path::Path;
use std::process::{Command, Output};

fn coclo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coclo"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path, tag: &str, duration: &str, seed: &str) {
    let out = coclo(
        &[
            "simulate",
            "--terrain",
            "flat",
            "--duration",
            duration,
            "--seed",
            seed,
            "--out-log",
            &format!("{tag}.jsonl"),
            "--out-truth",
            &format!("{tag}.csv"),
        ],
        dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "a", "60", "7");
    simulate(dir.path(), "b", "60", "7");
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    assert_eq!(read("a.csv"), read("b.csv"));
}

#[test]
fn replay_reports_drift_and_compare_tabulates() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "walk", "6", "3");
    let out = coclo(
        &[
            "replay",
            "--log",
            "walk.jsonl",
            "--truth",
            "walk.csv",
            "--out-trajectory",
            "est.csv",
            "--out-report",
            "report.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("drift_percent"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert!(report["drift_percent"].as_f64().unwrap() >= 0.0);

    let out = coclo(
        &[
            "compare",
            "--truth",
            "walk.csv",
            "walk.csv",
            "est.csv",
            "--out-csv",
            "table.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    let truth_row: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(truth_row[0], "walk");
    assert!(
        truth_row[1..6]
            .iter()
            .chain([&truth_row[7]])
            .all(|c| *c == "0"),
        "{}",
        rows[1]
    );
    assert!(rows[2].starts_with("est,"));
}

#[test]
fn calibrate_contact_writes_per_leg_tables() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "walk", "8", "5");
    let out = coclo(
        &[
            "calibrate-contact",
            "--log",
            "walk.jsonl",
            "--truth",
            "walk.csv",
            "--out",
            "calib.toml",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("calib.toml")).unwrap();
    assert_eq!(text.matches("[[leg]]").count(), 6);
}

#[test]
fn compare_without_files_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = coclo(&["compare", "--truth", "t.csv"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = coclo(&["simulate", "--no-such-flag"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn malformed_log_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "walk", "1", "1");
    let log = dir.path().join("walk.jsonl");
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{not json}\n");
    let bad_line = text.lines().count();
    std::fs::write(&log, text).unwrap();
    let out = coclo(
        &[
            "replay",
            "--log",
            "walk.jsonl",
            "--out-trajectory",
            "est.csv",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("line {bad_line}")), "{err}");
    assert!(!dir.path().join("est.csv").exists());
}
