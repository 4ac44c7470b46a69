#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fairsum() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairsum"))
}

pub fn run(args: &[&str]) -> Output {
    fairsum().args(args).output().expect("fairsum runs")
}

pub fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// 658 left, 1,309 right and 153 neutral records, interleaved.
pub fn write_fixture(dir: &Path) -> PathBuf {
    let mut out = String::new();
    let (mut l, mut r, mut n) = (0, 0, 0);
    for i in 0..2_120 {
        let stance = if n < 153 && i % 13 == 3 {
            n += 1;
            "neutral"
        } else if l < 658 && (i % 3 == 0 || r == 1_309) {
            l += 1;
            "left"
        } else {
            r += 1;
            "right"
        };
        let record = serde_json::json!({"id": format!("tw-{i:05}"), "text": format!("Post {i} on the budget."), "stance": stance});
        out.push_str(&record.to_string());
        out.push('\n');
    }
    assert_eq!((l, r, n), (658, 1_309, 153));
    let path = dir.join("fixture.jsonl");
    fs::write(&path, out).unwrap();
    path
}

/// Mean `spd_second_order` per scenario from a scores.csv.
pub fn scenario_means(scores_csv: &Path) -> std::collections::BTreeMap<String, (f64, usize)> {
    let text = fs::read_to_string(scores_csv).unwrap();
    let mut acc: std::collections::BTreeMap<String, (f64, usize)> = Default::default();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let e = acc.entry(fields[1].to_string()).or_default();
        e.0 += fields[4].parse::<f64>().unwrap();
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (sum, n))| (k, (sum / n as f64, n))).collect()
}
