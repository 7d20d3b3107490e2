//! End-to-end tests driving the compiled `qra` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qra() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qra"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success, stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(cmd: &mut Command, code: i32) -> Output {
    let out = cmd.output().expect("binary runs");
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn detect_replays_the_demo_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let verdicts = dir.path().join("verdicts.csv");
    let summary = dir.path().join("summary.txt");
    run_ok(qra()
        .arg("detect")
        .arg(fixture("demo_events.jsonl"))
        .arg("--seeds")
        .arg(fixture("demo_seeds.jsonl"))
        .arg("--verdicts")
        .arg(&verdicts)
        .arg("--summary")
        .arg(&summary));

    let csv = fs::read_to_string(&verdicts).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 16, "header plus one row per event");
    assert_eq!(
        rows[0],
        "uid,rating,up_threshold,down_threshold,final_rating,status,alarm,similarity"
    );
    let malicious: Vec<&str> = rows[1..]
        .iter()
        .filter(|row| row.contains(",MALICIOUS,"))
        .map(|row| row.split(',').next().unwrap())
        .collect();
    assert_eq!(malicious, ["3", "5", "10", "14"]);
    assert!(rows[15].ends_with("4.36,TRUE,NONE,"), "final aggregate row: {}", rows[15]);

    let report = fs::read_to_string(&summary).unwrap();
    assert!(report.contains("score_including_all = 3.5333"));
    assert!(report.contains("score_excluding_malicious = 4.3600"));
    assert!(report.contains("score_difference = 0.8267"));
    assert!(report.contains("attack_type = DOWNGRADING"));
    // The summary is also echoed to stdout.
    let out = String::from_utf8_lossy(&run_ok(qra()
        .arg("detect")
        .arg(fixture("demo_events.jsonl"))
        .arg("--seeds")
        .arg(fixture("demo_seeds.jsonl"))
        .arg("--verdicts")
        .arg(&verdicts)
        .arg("--summary")
        .arg(&summary))
    .stdout)
    .to_string();
    assert!(out.contains("attack_type = DOWNGRADING"));
}

#[test]
fn detect_handles_an_empty_event_file() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("empty.jsonl");
    fs::write(&events, "# nothing here\n\n").unwrap();
    let verdicts = dir.path().join("verdicts.csv");
    let summary = dir.path().join("summary.txt");
    run_ok(qra()
        .arg("detect")
        .arg(&events)
        .arg("--verdicts")
        .arg(&verdicts)
        .arg("--summary")
        .arg(&summary));
    let csv = fs::read_to_string(&verdicts).unwrap();
    assert_eq!(csv.lines().count(), 1, "header only");
    assert!(fs::read_to_string(&summary).unwrap().contains("no events"));
}

#[test]
fn detect_rejects_malformed_events_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("bad.jsonl");
    fs::write(&events, "{\"user_id\":\"1\",\"product_id\":\"p1\",\"rating\":3,\"timestamp\":1}\nnot json\n").unwrap();
    let out = run_err(
        qra()
            .arg("detect")
            .arg(&events)
            .arg("--verdicts")
            .arg(dir.path().join("v.csv"))
            .arg("--summary")
            .arg(dir.path().join("s.txt")),
        2,
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr names the offending line: {stderr}");
}

#[test]
fn detect_rejects_out_of_scale_rating_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("bad.jsonl");
    fs::write(&events, "{\"user_id\":\"1\",\"product_id\":\"p1\",\"rating\":9,\"timestamp\":1}\n").unwrap();
    run_err(
        qra()
            .arg("detect")
            .arg(&events)
            .arg("--verdicts")
            .arg(dir.path().join("v.csv"))
            .arg("--summary")
            .arg(dir.path().join("s.txt")),
        2,
    );
}

#[test]
fn missing_event_file_is_an_io_error_not_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    run_err(
        qra()
            .arg("detect")
            .arg(dir.path().join("nowhere.jsonl"))
            .arg("--verdicts")
            .arg(dir.path().join("v.csv"))
            .arg("--summary")
            .arg(dir.path().join("s.txt")),
        1,
    );
}

#[test]
fn bad_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(&config, "no_such_key = 1\n").unwrap();
    run_err(
        qra()
            .arg("detect")
            .arg(fixture("demo_events.jsonl"))
            .arg("--config")
            .arg(&config)
            .arg("--verdicts")
            .arg(dir.path().join("v.csv"))
            .arg("--summary")
            .arg(dir.path().join("s.txt")),
        3,
    );
    // Out-of-range flag values go through the same validation.
    run_err(
        qra()
            .arg("detect")
            .arg(fixture("demo_events.jsonl"))
            .arg("--sim-high")
            .arg("7")
            .arg("--verdicts")
            .arg(dir.path().join("v.csv"))
            .arg("--summary")
            .arg(dir.path().join("s.txt")),
        3,
    );
}

#[test]
fn config_file_keys_shift_behavior() {
    // With a huge sensitivity the band swallows every rating: nobody alarms,
    // nobody is condemned, and the two aggregates coincide.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(&config, "# wide open\nsensitivity = 10\n").unwrap();
    let verdicts = dir.path().join("v.csv");
    run_ok(qra()
        .arg("detect")
        .arg(fixture("demo_events.jsonl"))
        .arg("--seeds")
        .arg(fixture("demo_seeds.jsonl"))
        .arg("--config")
        .arg(&config)
        .arg("--verdicts")
        .arg(&verdicts)
        .arg("--summary")
        .arg(dir.path().join("s.txt")));
    let csv = fs::read_to_string(&verdicts).unwrap();
    assert!(!csv.contains("MALICIOUS"));
}

#[test]
fn simulate_is_deterministic_and_labels_every_rater() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let events = dir.path().join(format!("ev{run}.jsonl"));
        let truth = dir.path().join(format!("tr{run}.jsonl"));
        run_ok(qra()
            .arg("simulate")
            .arg("--n-honest")
            .arg("18")
            .arg("--n-malicious")
            .arg("7")
            .arg("--seed")
            .arg("7")
            .arg("--events-out")
            .arg(&events)
            .arg("--truth-out")
            .arg(&truth));
        outputs.push((fs::read(&events).unwrap(), fs::read(&truth).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1], "same seed, same bytes");

    let truth = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert_eq!(truth.lines().count(), 25, "one label per rater");
    assert_eq!(truth.matches("MALICIOUS").count(), 7);
    let events = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(events.lines().count(), 25, "one event per rater");
}

#[test]
fn simulate_rejects_quality_off_the_scale() {
    let dir = tempfile::tempdir().unwrap();
    run_err(
        qra()
            .arg("simulate")
            .arg("--n-honest")
            .arg("3")
            .arg("--n-malicious")
            .arg("1")
            .arg("--q")
            .arg("9")
            .arg("--events-out")
            .arg(dir.path().join("e.jsonl"))
            .arg("--truth-out")
            .arg(dir.path().join("t.jsonl")),
        3,
    );
}

#[test]
fn snapshot_resume_matches_the_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("demo_events.jsonl")).unwrap();
    let events: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    assert_eq!(events.len(), 15);
    let first = dir.path().join("first.jsonl");
    let rest = dir.path().join("rest.jsonl");
    fs::write(&first, events[..7].join("\n")).unwrap();
    fs::write(&rest, events[7..].join("\n")).unwrap();

    let full_csv = dir.path().join("full.csv");
    run_ok(qra()
        .arg("detect")
        .arg(fixture("demo_events.jsonl"))
        .arg("--seeds")
        .arg(fixture("demo_seeds.jsonl"))
        .arg("--verdicts")
        .arg(&full_csv)
        .arg("--summary")
        .arg(dir.path().join("full.txt")));

    let snapshot = dir.path().join("engine.snapshot");
    run_ok(qra()
        .arg("detect")
        .arg(&first)
        .arg("--seeds")
        .arg(fixture("demo_seeds.jsonl"))
        .arg("--verdicts")
        .arg(dir.path().join("v1.csv"))
        .arg("--summary")
        .arg(dir.path().join("s1.txt"))
        .arg("--snapshot-out")
        .arg(&snapshot));
    let resumed_csv = dir.path().join("v2.csv");
    run_ok(qra()
        .arg("detect")
        .arg(&rest)
        .arg("--resume")
        .arg(&snapshot)
        .arg("--verdicts")
        .arg(&resumed_csv)
        .arg("--summary")
        .arg(dir.path().join("s2.txt")));

    let full: Vec<String> =
        fs::read_to_string(&full_csv).unwrap().lines().skip(1).map(String::from).collect();
    let resumed: Vec<String> =
        fs::read_to_string(&resumed_csv).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(resumed, full[7..], "second half replays identically after resume");
}

#[test]
fn resume_refuses_config_flags() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("empty.jsonl");
    fs::write(&events, "").unwrap();
    let snapshot = dir.path().join("engine.snapshot");
    run_ok(qra()
        .arg("detect")
        .arg(&events)
        .arg("--verdicts")
        .arg(dir.path().join("v.csv"))
        .arg("--summary")
        .arg(dir.path().join("s.txt"))
        .arg("--snapshot-out")
        .arg(&snapshot));
    run_err(
        qra()
            .arg("detect")
            .arg(&events)
            .arg("--resume")
            .arg(&snapshot)
            .arg("--seed")
            .arg("9")
            .arg("--verdicts")
            .arg(dir.path().join("v.csv"))
            .arg("--summary")
            .arg(dir.path().join("s.txt")),
        3,
    );
}

#[test]
fn corrupt_snapshot_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("empty.jsonl");
    fs::write(&events, "").unwrap();
    let snapshot = dir.path().join("engine.snapshot");
    fs::write(&snapshot, "{\"version\":1,\"checksum\":\"00\",\"payload\":{}}").unwrap();
    let out = run_err(
        qra()
            .arg("detect")
            .arg(&events)
            .arg("--resume")
            .arg(&snapshot)
            .arg("--verdicts")
            .arg(dir.path().join("v.csv"))
            .arg("--summary")
            .arg(dir.path().join("s.txt")),
        2,
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn cusum_detector_runs_the_fixture_without_feedback_fields() {
    let dir = tempfile::tempdir().unwrap();
    let verdicts = dir.path().join("v.csv");
    run_ok(qra()
        .arg("detect")
        .arg(fixture("demo_events.jsonl"))
        .arg("--detector")
        .arg("cusum")
        .arg("--verdicts")
        .arg(&verdicts)
        .arg("--summary")
        .arg(dir.path().join("s.txt")));
    let csv = fs::read_to_string(&verdicts).unwrap();
    for row in csv.lines().skip(1) {
        assert!(row.ends_with(','), "similarity column stays empty: {row}");
    }

    run_err(
        qra()
            .arg("detect")
            .arg(fixture("demo_events.jsonl"))
            .arg("--detector")
            .arg("cusum")
            .arg("--seeds")
            .arg(fixture("demo_seeds.jsonl"))
            .arg("--verdicts")
            .arg(&verdicts)
            .arg("--summary")
            .arg(dir.path().join("s.txt")),
        3,
    );
}

#[test]
fn compare_replays_a_simulated_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("ev.jsonl");
    let truth = dir.path().join("tr.jsonl");
    run_ok(qra()
        .arg("simulate")
        .arg("--n-honest")
        .arg("7")
        .arg("--n-malicious")
        .arg("3")
        .arg("--seed")
        .arg("42")
        .arg("--events-out")
        .arg(&events)
        .arg("--truth-out")
        .arg(&truth));

    let out_csv = dir.path().join("cmp.csv");
    let out = run_ok(qra()
        .arg("compare")
        .arg("--events")
        .arg(&events)
        .arg("--truth")
        .arg(&truth)
        .arg("--out")
        .arg(&out_csv));
    let csv = fs::read_to_string(&out_csv).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(
        rows[0],
        "n_users,qra_far,cusum_far,qra_detection,cusum_detection,seeds"
    );
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("10,"), "ten raters in the scenario: {}", rows[1]);
    assert!(rows[1].ends_with(",1"), "single scenario, one seed: {}", rows[1]);
    assert!(String::from_utf8_lossy(&out.stdout).contains(rows[1]));
}

#[test]
fn compare_runs_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("cmp.csv");
    run_ok(qra()
        .arg("compare")
        .arg("--sizes")
        .arg("0,10")
        .arg("--seeds-per-size")
        .arg("2")
        .arg("--out")
        .arg(&out_csv));
    let csv = fs::read_to_string(&out_csv).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3, "header plus one row per size");
    assert!(rows[1].starts_with("0,"));
    assert!(rows[2].starts_with("10,"));
    assert!(rows[1].ends_with(",2"));

    run_err(
        qra()
            .arg("compare")
            .arg("--sizes")
            .arg("10")
            .arg("--seeds-per-size")
            .arg("0")
            .arg("--out")
            .arg(&out_csv),
        3,
    );
    run_err(
        qra()
            .arg("compare")
            .arg("--malicious-fraction")
            .arg("1.5")
            .arg("--out")
            .arg(&out_csv),
        3,
    );
}
