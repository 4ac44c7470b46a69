#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// The 2,120-record fixture: 658 left, 1,309 right and 153 neutral
/// documents in a fixed shuffled order.
pub fn fixture_records() -> Vec<(String, String, &'static str)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut stances: Vec<&'static str> = std::iter::repeat_n("left", 658)
        .chain(std::iter::repeat_n("right", 1_309))
        .chain(std::iter::repeat_n("neutral", 153))
        .collect();
    stances.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(7));
    stances
        .into_iter()
        .enumerate()
        .map(|(i, stance)| {
            let text = format!("Tweet {i}, about \"policy\" from the {stance} side.");
            (format!("tw-{i:05}"), text, stance)
        })
        .collect()
}

pub fn write_fixture_jsonl(dir: &Path) -> PathBuf {
    let mut out = String::new();
    for (id, text, stance) in fixture_records() {
        let record = serde_json::json!({"id": id, "text": text, "stance": stance});
        writeln!(out, "{record}").unwrap();
    }
    let path = dir.join("fixture.jsonl");
    std::fs::write(&path, out).unwrap();
    path
}

pub fn write_fixture_csv(dir: &Path) -> PathBuf {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["id", "text", "stance"]).unwrap();
    for (id, text, stance) in fixture_records() {
        wtr.write_record([id.as_str(), text.as_str(), stance]).unwrap();
    }
    let path = dir.join("fixture.csv");
    std::fs::write(&path, wtr.into_inner().unwrap()).unwrap();
    path
}
