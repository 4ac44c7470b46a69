//! CSV and Markdown rendering of audit results.
//!
//! Second-order SPD is printed with 4 decimals and ROUGE as a percentage
//! with 2. Within each (model, scenario) group, methods are ranked by
//! ascending `|mean SPD_2nd|` and the best is bolded in Markdown.
//! t-statistics carry a `*` when `p < 0.05`.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fairmetrics::ttest::SIGNIFICANCE_LEVEL;
use crate::rouge::{Prf, RougeScore};
use crate::scenario::{EQUAL, SKEW_LEFT, SKEW_RIGHT};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no rows to render")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: bad {field} value {value:?}")]
    BadField {
        row: usize,
        field: &'static str,
        value: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub model: String,
    pub method: String,
    pub scenario: String,
    pub mean_spd2: f64,
    pub std: Option<f64>,
    pub n_scored: usize,
    pub n_excluded: usize,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub rouge: Option<RougeScore<f64>>,
}

impl AuditRow {
    pub fn significant(&self) -> bool {
        self.p_value.is_some_and(|p| p < SIGNIFICANCE_LEVEL)
    }
}

fn by_abs_then_method(a: &AuditRow, b: &AuditRow) -> Ordering {
    a.mean_spd2
        .abs()
        .total_cmp(&b.mean_spd2.abs())
        .then_with(|| a.method.cmp(&b.method))
}

/// Ranks (1 = lowest `|mean_spd2|`) for rows of one model and scenario,
/// aligned with the input order. Ties go to the lexicographically smaller
/// method name.
pub fn rank_methods(rows: &[AuditRow]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| by_abs_then_method(&rows[i], &rows[j]));
    let mut ranks = vec![0; rows.len()];
    for (rank, &i) in order.iter().enumerate() {
        ranks[i] = rank + 1;
    }
    ranks
}

/// Ranks for a mixed table, computed within each (model, scenario) group.
pub fn rank_all(rows: &[AuditRow]) -> Vec<usize> {
    let mut ranks = vec![0; rows.len()];
    let mut groups: Vec<(&str, &str, Vec<usize>)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|(m, s, _)| *m == row.model && *s == row.scenario)
        {
            Some((_, _, members)) => members.push(i),
            None => groups.push((&row.model, &row.scenario, vec![i])),
        }
    }
    for (_, _, members) in groups {
        let group: Vec<AuditRow> = members.iter().map(|&i| rows[i].clone()).collect();
        for (&i, rank) in members.iter().zip(rank_methods(&group)) {
            ranks[i] = rank;
        }
    }
    ranks
}

/// Fixed-point formatting without a negative zero.
pub fn fixed(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn format_spd(value: f64) -> String {
    fixed(value, 4)
}

pub fn format_rouge(f1: f64) -> String {
    fixed(f1 * 100.0, 2)
}

/// t-statistic with 2 decimals, starred when significant.
pub fn format_t(t: f64, p: f64) -> String {
    let star = if p < SIGNIFICANCE_LEVEL { "*" } else { "" };
    format!("{}{star}", fixed(t, 2))
}

fn opt(value: Option<f64>, decimals: usize) -> String {
    value.map(|v| fixed(v, decimals)).unwrap_or_default()
}

const CSV_HEADER: [&str; 14] = [
    "model",
    "method",
    "scenario",
    "mean_spd2",
    "std",
    "n_scored",
    "n_excluded",
    "t_stat",
    "p_value",
    "significant",
    "rank",
    "rouge1",
    "rouge2",
    "rougeL",
];

pub fn render_csv(rows: &[AuditRow]) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let ranks = rank_all(rows);
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(CSV_HEADER)?;
    for (row, rank) in rows.iter().zip(ranks) {
        let rouge =
            |get: fn(&RougeScore<f64>) -> Prf<f64>| row.rouge.map(|r| format_rouge(get(&r).f1)).unwrap_or_default();
        wtr.write_record([
            row.model.clone(),
            row.method.clone(),
            row.scenario.clone(),
            format_spd(row.mean_spd2),
            opt(row.std, 4),
            row.n_scored.to_string(),
            row.n_excluded.to_string(),
            opt(row.t_stat, 4),
            opt(row.p_value, 6),
            if row.significant() { "*".into() } else { String::new() },
            rank.to_string(),
            rouge(|r| r.rouge1),
            rouge(|r| r.rouge2),
            rouge(|r| r.rouge_l),
        ])?;
    }
    let bytes = wtr.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Inverse of [`render_csv`] up to the printed precision. ROUGE columns
/// only carry F1, so precision and recall come back as zero.
pub fn parse_csv(text: &str) -> Result<Vec<AuditRow>, ReportError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let num = |idx: usize, name: &'static str| -> Result<f64, ReportError> {
            field(idx).parse().map_err(|_| ReportError::BadField {
                row: i + 1,
                field: name,
                value: field(idx).to_string(),
            })
        };
        let opt_num = |idx: usize, name: &'static str| -> Result<Option<f64>, ReportError> {
            if field(idx).is_empty() {
                Ok(None)
            } else {
                num(idx, name).map(Some)
            }
        };
        let count = |idx: usize, name: &'static str| -> Result<usize, ReportError> {
            field(idx).parse().map_err(|_| ReportError::BadField {
                row: i + 1,
                field: name,
                value: field(idx).to_string(),
            })
        };
        let f1 = |v: f64| Prf {
            precision: 0.0,
            recall: 0.0,
            f1: v / 100.0,
        };
        let rouge = match (opt_num(11, "rouge1")?, opt_num(12, "rouge2")?, opt_num(13, "rougeL")?) {
            (Some(a), Some(b), Some(c)) => Some(RougeScore {
                rouge1: f1(a),
                rouge2: f1(b),
                rouge_l: f1(c),
            }),
            _ => None,
        };
        rows.push(AuditRow {
            model: field(0).to_string(),
            method: field(1).to_string(),
            scenario: field(2).to_string(),
            mean_spd2: num(3, "mean_spd2")?,
            std: opt_num(4, "std")?,
            n_scored: count(5, "n_scored")?,
            n_excluded: count(6, "n_excluded")?,
            t_stat: opt_num(7, "t_stat")?,
            p_value: opt_num(8, "p_value")?,
            rouge,
        });
    }
    Ok(rows)
}

fn scenario_heading(name: &str) -> String {
    match name {
        EQUAL => "SPD2-Equal".into(),
        SKEW_LEFT => "SPD2-Left".into(),
        SKEW_RIGHT => "SPD2-Right".into(),
        other => format!("SPD2-{other}"),
    }
}

/// Builtin scenarios first in their usual order, then any others by name.
fn scenario_columns(rows: &[AuditRow]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for row in rows {
        if !names.contains(&row.scenario) {
            names.push(row.scenario.clone());
        }
    }
    let key = |s: &String| match s.as_str() {
        EQUAL => (0, String::new()),
        SKEW_LEFT => (1, String::new()),
        SKEW_RIGHT => (2, String::new()),
        other => (3, other.to_string()),
    };
    names.sort_by_key(key);
    names
}

fn model_methods(rows: &[AuditRow]) -> Vec<(String, String)> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for row in rows {
        let pair = (row.model.clone(), row.method.clone());
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    pairs
}

fn table_header(out: &mut String, columns: &[String]) {
    let _ = writeln!(out, "| {} |", columns.join(" | "));
    let _ = writeln!(out, "|{}", " --- |".repeat(columns.len()));
}

pub fn render_markdown(rows: &[AuditRow]) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let ranks = rank_all(rows);
    let scenarios = scenario_columns(rows);
    let pairs = model_methods(rows);
    let with_rouge = rows.iter().any(|r| r.rouge.is_some());
    let find = |model: &str, method: &str, scenario: &str| {
        rows.iter()
            .position(|r| r.model == model && r.method == method && r.scenario == scenario)
    };

    let mut out = String::new();
    out.push_str("## Second-order SPD\n\n");
    let mut columns: Vec<String> = vec!["Model".into(), "Method".into()];
    if with_rouge {
        columns.extend(["ROUGE-1", "ROUGE-2", "ROUGE-L"].map(String::from));
    }
    columns.extend(scenarios.iter().map(|s| scenario_heading(s)));
    table_header(&mut out, &columns);
    for (model, method) in &pairs {
        let mut cells = vec![model.clone(), method.clone()];
        if with_rouge {
            // Averaged over the scenarios that have ROUGE.
            let scores: Vec<RougeScore<f64>> = rows
                .iter()
                .filter(|r| &r.model == model && &r.method == method)
                .filter_map(|r| r.rouge)
                .collect();
            match crate::rouge::mean_score(&scores) {
                Some(r) => cells.extend([r.rouge1.f1, r.rouge2.f1, r.rouge_l.f1].map(format_rouge)),
                None => cells.extend(["-", "-", "-"].map(String::from)),
            }
        }
        for scenario in &scenarios {
            cells.push(match find(model, method, scenario) {
                Some(i) => {
                    let cell = format!("{} ({})", format_spd(rows[i].mean_spd2), ranks[i]);
                    if ranks[i] == 1 {
                        format!("**{cell}**")
                    } else {
                        cell
                    }
                }
                None => "-".into(),
            });
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }

    out.push_str("\n## Paired t-tests, observed vs expected SPD\n\n");
    let mut columns: Vec<String> = vec!["Model".into(), "Method".into()];
    columns.extend(scenarios.iter().map(|s| scenario_heading(s).replacen("SPD2", "t", 1)));
    table_header(&mut out, &columns);
    for (model, method) in &pairs {
        let mut cells = vec![model.clone(), method.clone()];
        for scenario in &scenarios {
            cells.push(
                find(model, method, scenario)
                    .and_then(|i| Some(format_t(rows[i].t_stat?, rows[i].p_value?)))
                    .unwrap_or_else(|| "-".into()),
            );
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }

    out.push_str("\n## Instances scored / excluded\n\n");
    let mut columns: Vec<String> = vec!["Model".into(), "Method".into()];
    columns.extend(scenarios.iter().map(|s| scenario_heading(s).replacen("SPD2-", "", 1)));
    table_header(&mut out, &columns);
    for (model, method) in &pairs {
        let mut cells = vec![model.clone(), method.clone()];
        for scenario in &scenarios {
            cells.push(
                find(model, method, scenario)
                    .map(|i| {
                        let std = rows[i]
                            .std
                            .map(|s| format!(", sd {}", format_spd(s)))
                            .unwrap_or_default();
                        format!("{}/{}{std}", rows[i].n_scored, rows[i].n_excluded)
                    })
                    .unwrap_or_else(|| "-".into()),
            );
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    Ok(out)
}
