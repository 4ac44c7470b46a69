//! ROUGE-1, ROUGE-2 and ROUGE-L (F1 with precision and recall).
//!
//! Tokens are lowercase maximal alphanumeric runs; no stemming and no
//! stopword removal. Scores are only comparable with other scores produced
//! by this tokenizer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{two, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RougeError {
    #[error("reference has no {0}-grams")]
    UndefinedReference(usize),
    #[error("unsupported n-gram order {0}")]
    UnsupportedOrder(usize),
    #[error("no references given")]
    NoReferences,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

impl<T: Scalar> Prf<T> {
    fn from_counts(overlap: usize, candidate: usize, reference: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                T::zero()
            } else {
                T::from_counts(num as u64, den as u64)
            }
        };
        let precision = ratio(overlap, candidate);
        let recall = ratio(overlap, reference);
        let sum = precision + recall;
        let f1 = if sum == T::zero() {
            T::zero()
        } else {
            two::<T>() * precision * recall / sum
        };
        Prf { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore<T> {
    pub rouge1: Prf<T>,
    pub rouge2: Prf<T>,
    #[serde(rename = "rougeL")]
    pub rouge_l: Prf<T>,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap for `n ∈ {1, 2}`.
pub fn rouge_n<T: Scalar>(candidate: &[String], reference: &[String], n: usize) -> Result<Prf<T>, RougeError> {
    if !(1..=2).contains(&n) {
        return Err(RougeError::UnsupportedOrder(n));
    }
    let ref_total = reference.len().saturating_sub(n - 1);
    if ref_total == 0 {
        return Err(RougeError::UndefinedReference(n));
    }
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_counts = ngram_counts(reference, n);
    let overlap: usize = ngram_counts(candidate, n)
        .iter()
        .map(|(gram, c)| (*c).min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    Ok(Prf::from_counts(overlap, cand_total, ref_total))
}

/// Length of the longest common subsequence (two-row dynamic program).
pub fn lcs_len<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<T: Scalar>(candidate: &[String], reference: &[String]) -> Result<Prf<T>, RougeError> {
    if reference.is_empty() {
        return Err(RougeError::UndefinedReference(1));
    }
    Ok(Prf::from_counts(
        lcs_len(candidate, reference),
        candidate.len(),
        reference.len(),
    ))
}

/// Score a candidate against one or more references, keeping the
/// reference with the best F1 separately for each measure.
pub fn score<T: Scalar>(candidate: &str, references: &[&str]) -> Result<RougeScore<T>, RougeError> {
    if references.is_empty() {
        return Err(RougeError::NoReferences);
    }
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    Ok(RougeScore {
        rouge1: best_over(&refs, |r| rouge_n(&cand, r, 1))?,
        rouge2: best_over(&refs, |r| rouge_n(&cand, r, 2))?,
        rouge_l: best_over(&refs, |r| rouge_l(&cand, r))?,
    })
}

fn best_over<T: Scalar>(
    refs: &[Vec<String>],
    measure: impl Fn(&[String]) -> Result<Prf<T>, RougeError>,
) -> Result<Prf<T>, RougeError> {
    let mut best: Option<Prf<T>> = None;
    let mut last_err = RougeError::NoReferences;
    for r in refs {
        match measure(r) {
            Ok(p) if best.is_none_or(|b| p.f1 > b.f1) => best = Some(p),
            Ok(_) => {}
            Err(e) => last_err = e,
        }
    }
    best.ok_or(last_err)
}

/// Component-wise mean of several scores.
pub fn mean_score(scores: &[RougeScore<f64>]) -> Option<RougeScore<f64>> {
    if scores.is_empty() {
        return None;
    }
    let n = scores.len() as f64;
    let avg = |get: fn(&RougeScore<f64>) -> Prf<f64>| Prf {
        precision: scores.iter().map(|s| get(s).precision).sum::<f64>() / n,
        recall: scores.iter().map(|s| get(s).recall).sum::<f64>() / n,
        f1: scores.iter().map(|s| get(s).f1).sum::<f64>() / n,
    };
    Some(RougeScore {
        rouge1: avg(|s| s.rouge1),
        rouge2: avg(|s| s.rouge2),
        rouge_l: avg(|s| s.rouge_l),
    })
}
