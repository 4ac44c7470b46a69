//! Stance proportions and the second-order statistical parity difference.
//!
//! For an input bundle with left/right shares `(P_TL, P_TR)` and a summary
//! with weighted sentence shares `(P_SL, P_SR)`:
//!
//! ```text
//! SPD_expected = P_TL - P_TR
//! SPD_observed = P_SL - P_SR
//! SPD_2nd      = (SPD_expected - SPD_observed) / 2      ∈ [-1, 1]
//! ```
//!
//! Negative values mean the summary over-represents the left relative to
//! its input, positive values the right.

pub mod ttest;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::ClassifierPrediction;
use crate::corpus::Lean;
use crate::scalar::{two, Scalar};
use crate::segmenter::WeightedSentence;

pub use ttest::{paired_t_test, student_t_two_tailed, PairedTestResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no sentence survived the confidence threshold, or total weight is zero")]
    UndefinedProportions,
    #[error("proportions ({p_left:?}, {p_right:?}) are not a valid binary split")]
    InvalidProportions { p_left: f64, p_right: f64 },
    #[error("no scores to aggregate")]
    NoScores,
    #[error("paired test needs at least 2 pairs, got {0}")]
    InsufficientSamples(usize),
    #[error("paired samples differ in length: {expected} expected vs {observed} observed")]
    LengthMismatch { expected: usize, observed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StanceProportions<T> {
    pub p_left: T,
    pub p_right: T,
    pub total_weight: T,
}

impl<T: Scalar> StanceProportions<T> {
    pub fn new(p_left: T, p_right: T, total_weight: T) -> Result<Self, MetricsError> {
        let zero = T::zero();
        let one = T::one();
        let valid = p_left >= zero
            && p_right >= zero
            && p_left <= one
            && p_right <= one
            && (p_left + p_right - one).abs() <= T::tolerance()
            && total_weight > zero;
        if !valid {
            return Err(MetricsError::InvalidProportions {
                p_left: p_left.to_f64_lossy(),
                p_right: p_right.to_f64_lossy(),
            });
        }
        Ok(StanceProportions {
            p_left,
            p_right,
            total_weight,
        })
    }

    /// Binary split from the left share alone, with unit total weight.
    pub fn from_left(p_left: T) -> Result<Self, MetricsError> {
        Self::new(p_left, T::one() - p_left, T::one())
    }

    pub fn from_counts(n_left: usize, n_right: usize) -> Result<Self, MetricsError> {
        let total = (n_left + n_right) as u64;
        if total == 0 {
            return Err(MetricsError::UndefinedProportions);
        }
        Self::new(
            T::from_counts(n_left as u64, total),
            T::from_counts(n_right as u64, total),
            T::from_u64(total).expect("count fits"),
        )
    }

    /// The same split with left and right exchanged.
    pub fn swapped(self) -> Self {
        StanceProportions {
            p_left: self.p_right,
            p_right: self.p_left,
            total_weight: self.total_weight,
        }
    }

    pub fn spd(&self) -> T {
        self.p_left - self.p_right
    }
}

/// One classified summary item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T> {
    pub lean: Lean,
    pub weight: T,
    pub confidence: f64,
}

/// Pair sentences with their predictions by id. Sentences without a
/// prediction are skipped.
pub fn observations(sentences: &[WeightedSentence], predictions: &[ClassifierPrediction]) -> Vec<Observation<f64>> {
    let by_id: std::collections::HashMap<&str, &ClassifierPrediction> =
        predictions.iter().map(|p| (p.item_id.as_str(), p)).collect();
    sentences
        .iter()
        .filter_map(|s| {
            by_id.get(s.sentence_id.as_str()).map(|p| Observation {
                lean: p.label,
                weight: s.weight,
                confidence: p.confidence,
            })
        })
        .collect()
}

/// Weighted left/right shares over items with `confidence >= threshold`.
pub fn observed_proportions<T: Scalar>(
    items: &[Observation<T>],
    confidence_threshold: f64,
) -> Result<StanceProportions<T>, MetricsError> {
    let mut left = T::zero();
    let mut right = T::zero();
    for item in items.iter().filter(|i| i.confidence >= confidence_threshold) {
        match item.lean {
            Lean::Left => left = left + item.weight,
            Lean::Right => right = right + item.weight,
        }
    }
    let total = left + right;
    if total <= T::zero() {
        return Err(MetricsError::UndefinedProportions);
    }
    let p_left = left / total;
    // Complement rather than right / total keeps the pair summing to one.
    StanceProportions::new(p_left, T::one() - p_left, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpdParts<T> {
    pub spd_expected: T,
    pub spd_observed: T,
    pub spd_second_order: T,
}

pub fn second_order_spd<T: Scalar>(input: &StanceProportions<T>, summary: &StanceProportions<T>) -> SpdParts<T> {
    let spd_expected = input.spd();
    let spd_observed = summary.spd();
    SpdParts {
        spd_expected,
        spd_observed,
        spd_second_order: (spd_expected - spd_observed) / two(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessScore<T> {
    pub instance_id: String,
    pub scenario: String,
    pub spd_expected: T,
    pub spd_observed: T,
    pub spd_second_order: T,
}

impl<T: Scalar> FairnessScore<T> {
    pub fn new(instance_id: impl Into<String>, scenario: impl Into<String>, parts: SpdParts<T>) -> Self {
        FairnessScore {
            instance_id: instance_id.into(),
            scenario: scenario.into(),
            spd_expected: parts.spd_expected,
            spd_observed: parts.spd_observed,
            spd_second_order: parts.spd_second_order,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate<T> {
    pub mean: T,
    /// Sample (n - 1) standard deviation; `None` for a single score.
    pub std_dev: Option<T>,
    pub count: usize,
    pub excluded: usize,
}

/// Mean and sample standard deviation of `spd_second_order`, summed in
/// `instance_id` order so the result does not depend on input order.
pub fn aggregate_scores<T: Scalar + Float>(
    scores: &[FairnessScore<T>],
    excluded: usize,
) -> Result<Aggregate<T>, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::NoScores);
    }
    let mut ordered: Vec<&FairnessScore<T>> = scores.iter().collect();
    ordered.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let n = <T as num_traits::NumCast>::from(ordered.len()).expect("count fits");
    let mean = ordered
        .iter()
        .fold(<T as num_traits::Zero>::zero(), |acc, s| acc + s.spd_second_order)
        / n;
    let std_dev = (ordered.len() > 1).then(|| {
        let ss = ordered.iter().fold(<T as num_traits::Zero>::zero(), |acc, s| {
            let d = s.spd_second_order - mean;
            acc + d * d
        });
        (ss / (n - <T as num_traits::One>::one())).sqrt()
    });
    Ok(Aggregate {
        mean,
        std_dev,
        count: ordered.len(),
        excluded,
    })
}

/// Paired test over scored instances, ordered by `instance_id`.
pub fn paired_test_for<T: Scalar + Float>(scores: &[FairnessScore<T>]) -> Result<PairedTestResult<T>, MetricsError> {
    let mut ordered: Vec<&FairnessScore<T>> = scores.iter().collect();
    ordered.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let expected: Vec<T> = ordered.iter().map(|s| s.spd_expected).collect();
    let observed: Vec<T> = ordered.iter().map(|s| s.spd_observed).collect();
    paired_t_test(&expected, &observed)
}
