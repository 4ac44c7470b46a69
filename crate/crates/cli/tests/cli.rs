mod common;

use std::fs;
use std::io::Write;
use std::process::Stdio;

use common::{run, stderr, stdout};

#[test]
fn validate_prints_stance_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = common::write_fixture(dir.path());
    let out = run(&["validate", "--corpus", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "documents: 2120\nleft: 658\nright: 1309\nneutral: 153\n");
    let json = run(&["validate", "--corpus", path.to_str().unwrap(), "--json"]);
    let value: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(value["left"], 658);
}

#[test]
fn validate_missing_file_names_path() {
    let out = run(&["validate", "--corpus", "/definitely/not/here.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/definitely/not/here.jsonl"), "{}", stderr(&out));
}

#[test]
fn validate_duplicate_id_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.jsonl");
    fs::write(
        &path,
        "{\"id\":\"a\",\"text\":\"x\",\"stance\":\"left\"}\n{\"id\":\"a\",\"text\":\"y\",\"stance\":\"right\"}\n",
    )
    .unwrap();
    let out = run(&["validate", "--corpus", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("duplicate"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["run", "--corpus", "x.jsonl"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn scenarios_writes_three_hundred_instances() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::write_fixture(dir.path());
    let out_dir = dir.path().join("s");
    let out = run(&[
        "scenarios",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(out_dir.join("scenarios.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 300);
    let bad = run(&[
        "scenarios",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--size",
        "10",
    ]);
    assert_eq!(bad.status.code(), Some(2), "a 75/25 mix of 10 is not integral");
}

#[test]
fn simulate_left_bias_flagship() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = run(&[
        "simulate",
        "--bias",
        "left",
        "--strength",
        "0.4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let skew_right = report.lines().find(|l| l.contains(",skew_right,")).unwrap();
    assert_eq!(skew_right.split(',').nth(3), Some("-0.3000"));
    assert!(stdout(&out).contains("-0.3000"));
}

#[test]
fn simulate_fair_oracle_is_zero_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = run(&[
        "simulate",
        "--strength",
        "0",
        "--bias",
        "right",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let means: Vec<&str> = report.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(means, ["0.0000", "0.0000", "0.0000"]);
}

#[test]
fn simulate_on_a_real_corpus_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::write_fixture(dir.path());
    let out_dir = dir.path().join("sim");
    let out = run(&[
        "simulate",
        "--bias",
        "right",
        "--strength",
        "1",
        "--corpus",
        corpus.to_str().unwrap(),
        "--instances",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let means = common::scenario_means(&out_dir.join("scores.csv"));
    assert_eq!(means["equal"], (0.5, 10));
}

#[test]
fn score_over_empty_directory_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["score", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreachable_http_endpoint_fails_every_instance() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::write_fixture(dir.path());
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let url = format!("http://127.0.0.1:{port}");
    let out_dir = dir.path().join("run");
    let out = common::fairsum()
        .args([
            "run",
            "--corpus",
            corpus.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--instances",
            "2",
            "--summarizer",
            &url,
            "--classifier",
            &url,
            "--max-retries",
            "0",
        ])
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("0 completed"), "{}", stdout(&out));
    let summaries = fs::read_to_string(out_dir.join("summaries.jsonl")).unwrap();
    assert_eq!(summaries.lines().count(), 6);
    assert!(summaries.lines().all(|l| l.contains("\"failed\":true")));
}

#[test]
fn run_with_subprocess_oracles_then_score() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("tagged.jsonl");
    let mut text = String::new();
    for i in 0..40 {
        let (tag, stance) = if i % 2 == 0 {
            ("LEFT:", "left")
        } else {
            ("RIGHT:", "right")
        };
        text.push_str(&format!(
            "{{\"id\":\"d{i}\",\"text\":\"{tag} doc {i}.\",\"stance\":\"{stance}\"}}\n"
        ));
    }
    fs::write(&corpus, text).unwrap();
    let exe = env!("CARGO_BIN_EXE_fairsum");
    let out_dir = dir.path().join("run");
    let summarizer = format!("cmd:'{exe}' oracle summarizer --bias left --strength 0.4 --sentences 20");
    let classifier = format!("cmd:'{exe}' oracle classifier");
    let splitter = format!("cmd:'{exe}' oracle splitter");
    let out = run(&[
        "run",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--instances",
        "5",
        "--summarizer",
        &summarizer,
        "--classifier",
        &classifier,
        "--splitter",
        &splitter,
        "--model",
        "oracle",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let scored = run(&["score", "--out", out_dir.to_str().unwrap()]);
    assert!(scored.status.success(), "{}", stderr(&scored));
    let means = common::scenario_means(&out_dir.join("scores.csv"));
    assert!((means["skew_right"].0 + 0.3).abs() < 1e-12);

    // The snapshot alone reproduces the run.
    let again = dir.path().join("again");
    let mut config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("config.json")).unwrap()).unwrap();
    config["out"] = serde_json::Value::String(again.to_str().unwrap().into());
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, config.to_string()).unwrap();
    assert!(run(&["run", "--config", config_path.to_str().unwrap()])
        .status
        .success());
    assert!(run(&["score", "--out", again.to_str().unwrap()]).status.success());
    assert_eq!(
        fs::read(out_dir.join("scores.csv")).unwrap(),
        fs::read(again.join("scores.csv")).unwrap()
    );
}

#[test]
fn report_merges_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut inputs = Vec::new();
    for (name, strength) in [("a", "0.4"), ("b", "0")] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "simulate",
            "--bias",
            "left",
            "--strength",
            strength,
            "--instances",
            "5",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        inputs.push(out_dir.join("report.csv").to_str().unwrap().to_string());
    }
    let args: Vec<&str> = std::iter::once("report")
        .chain(inputs.iter().map(String::as_str))
        .collect();
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let md = stdout(&out);
    assert!(md.contains("| oracle | left-0.4 | -0.2000 (2) |"), "{md}");
    assert!(md.contains("| oracle | left-0 | **0.0000 (1)** |"), "{md}");
}

#[test]
fn oracle_serves_the_wire_protocol() {
    let mut child = common::fairsum()
        .args(["oracle", "classifier"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    {
        let stdin = child.stdin.as_mut().unwrap();
        writeln!(
            stdin,
            r#"{{"kind":"classify","items":[{{"id":"s1","text":"RIGHT: x."}}]}}"#
        )
        .unwrap();
        writeln!(
            stdin,
            r#"{{"kind":"classify","items":[{{"id":"s2","text":"untagged"}}]}}"#
        )
        .unwrap();
    }
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["labels"][0]["label"], "right");
    assert!(lines[1]["error"].is_string());
}
