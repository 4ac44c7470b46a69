//! Deterministic synthetic adapters with closed-form bias.
//!
//! The oracle summarizer reads `LEFT:`/`RIGHT:` tags off its input
//! documents, computes the input left share `p_L`, and emits `K` tagged
//! sentences of which `round(K * q_L)` are left, where
//!
//! ```text
//! q_L = λ·b + (1 - λ)·p_L      b = 1 (left), 0 (right), p_L (none)
//! ```
//!
//! The tag-reading classifier recovers the labels exactly, so the measured
//! second-order SPD is `λ·(p_L - b)` up to the rounding of `K * q_L`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adapters::protocol::{ClassifyResponse, LabelRecord, Request, Response, SplitResponse, SummarizeResponse};
use crate::adapters::transport::Handler;
use crate::adapters::ProtocolError;
use crate::corpus::{Corpus, Lean, Stance, StanceDocument};
use crate::scalar::{Rational, Scalar};

pub const LEFT_TAG: &str = "LEFT:";
pub const RIGHT_TAG: &str = "RIGHT:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasDirection {
    Left,
    Right,
    None,
}

impl FromStr for BiasDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(BiasDirection::Left),
            "right" => Ok(BiasDirection::Right),
            "none" => Ok(BiasDirection::None),
            other => Err(format!("unknown bias direction {other:?}")),
        }
    }
}

impl fmt::Display for BiasDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BiasDirection::Left => "left",
            BiasDirection::Right => "right",
            BiasDirection::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBias<T> {
    pub direction: BiasDirection,
    pub strength: T,
}

impl<T: Scalar> OracleBias<T> {
    pub fn new(direction: BiasDirection, strength: T) -> Self {
        OracleBias { direction, strength }
    }

    pub fn none() -> Self {
        OracleBias {
            direction: BiasDirection::None,
            strength: T::zero(),
        }
    }

    /// λ, clamped to [0, 1] and forced to 0 for an unbiased oracle.
    pub fn effective_strength(&self) -> T {
        match self.direction {
            BiasDirection::None => T::zero(),
            _ => clamp01(self.strength),
        }
    }

    fn target(&self, p_left: T) -> T {
        match self.direction {
            BiasDirection::Left => T::one(),
            BiasDirection::Right => T::zero(),
            BiasDirection::None => p_left,
        }
    }

    /// `q_L`, the left share the oracle aims to emit.
    pub fn emitted_left_share(&self, p_left: T) -> T {
        let lambda = self.effective_strength();
        lambda * self.target(p_left) + (T::one() - lambda) * p_left
    }

    pub fn to_f64(&self) -> OracleBias<f64> {
        OracleBias {
            direction: self.direction,
            strength: self.strength.to_f64_lossy(),
        }
    }
}

fn clamp01<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        T::zero()
    } else if v > T::one() {
        T::one()
    } else {
        v
    }
}

/// Number of left sentences among `k` for an input with the given counts.
pub fn oracle_left_count<T: Scalar>(n_left: usize, n_right: usize, k: usize, bias: &OracleBias<T>) -> usize {
    let p_left = T::from_counts(n_left as u64, (n_left + n_right) as u64);
    let q = bias.emitted_left_share(p_left);
    let n = (T::from_u64(k as u64).expect("k fits") * q).round_half_away();
    n.clamp(0, k as i64) as usize
}

/// `k` tagged sentences, left ones first. Bodies contain no internal
/// sentence punctuation so segmentation recovers them one-to-one.
pub fn oracle_summary_text(instance_id: &str, n_left: usize, k: usize) -> String {
    (0..k)
        .map(|i| {
            let tag = if i < n_left { LEFT_TAG } else { RIGHT_TAG };
            format!("{tag} {instance_id} item {i}.")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn oracle_summarize<T: Scalar>(
    instance_id: &str,
    n_left: usize,
    n_right: usize,
    k: usize,
    bias: &OracleBias<T>,
) -> String {
    oracle_summary_text(instance_id, oracle_left_count(n_left, n_right, k, bias), k)
}

/// Read the tag at the start of `text`.
pub fn oracle_classify(text: &str) -> Result<(Lean, f64), ProtocolError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with(LEFT_TAG) {
        Ok((Lean::Left, 1.0))
    } else if trimmed.starts_with(RIGHT_TAG) {
        Ok((Lean::Right, 1.0))
    } else {
        Err(ProtocolError::UntaggedText(text.to_string()))
    }
}

/// `λ·(p_L - b)`: the exact second-order SPD of the oracle before rounding.
pub fn predicted_second_order_spd<T: Scalar>(p_left: T, bias: &OracleBias<T>) -> T {
    bias.effective_strength() * (p_left - bias.target(p_left))
}

/// Prefix each document's text with its stance tag. Neutral documents are
/// left untouched.
pub fn tagged_corpus(corpus: &Corpus) -> Corpus {
    let docs = corpus
        .documents()
        .iter()
        .map(|d| StanceDocument {
            id: d.id.clone(),
            text: match d.stance {
                Stance::Left => format!("{LEFT_TAG} {}", d.text),
                Stance::Right => format!("{RIGHT_TAG} {}", d.text),
                Stance::Neutral => d.text.clone(),
            },
            stance: d.stance,
        })
        .collect();
    Corpus::from_documents(docs).expect("tagging preserves validity")
}

/// A tagged corpus of `n_left` left and `n_right` right placeholder documents.
pub fn synthetic_corpus(n_left: usize, n_right: usize) -> Corpus {
    let make = |stance: Stance, tag: &str, i: usize| StanceDocument {
        id: format!("syn-{}-{i:05}", stance.as_str()),
        text: format!("{tag} synthetic {} opinion {i}.", stance.as_str()),
        stance,
    };
    let docs = (0..n_left)
        .map(|i| make(Stance::Left, LEFT_TAG, i))
        .chain((0..n_right).map(|i| make(Stance::Right, RIGHT_TAG, i)))
        .collect();
    Corpus::from_documents(docs).expect("synthetic corpus is valid")
}

/// Biased summarizer speaking the adapter protocol.
#[derive(Debug, Clone)]
pub struct OracleSummarizer {
    pub bias: OracleBias<Rational>,
    pub sentences: usize,
}

impl OracleSummarizer {
    pub fn new(bias: OracleBias<f64>, sentences: usize) -> Self {
        OracleSummarizer {
            bias: OracleBias::new(bias.direction, Rational::from_f64_lossy(bias.strength)),
            sentences,
        }
    }
}

impl Handler for OracleSummarizer {
    fn handle(&self, request: Request) -> Response {
        let Request::Summarize(req) = request else {
            return Response::error("oracle summarizer only handles summarize requests");
        };
        if self.sentences == 0 {
            return Response::error("oracle summarizer needs at least one sentence");
        }
        let mut n_left = 0;
        let mut n_right = 0;
        for doc in &req.documents {
            match oracle_classify(doc) {
                Ok((Lean::Left, _)) => n_left += 1,
                Ok((Lean::Right, _)) => n_right += 1,
                Err(e) => return Response::error(e.to_string()),
            }
        }
        if n_left + n_right == 0 {
            return Response::error("no documents");
        }
        Response::Summarize(SummarizeResponse {
            summary: oracle_summarize(&req.instance_id, n_left, n_right, self.sentences, &self.bias),
            instance_id: req.instance_id,
        })
    }
}

/// Tag-reading classifier. Untagged items fail the whole request.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleClassifier;

impl Handler for OracleClassifier {
    fn handle(&self, request: Request) -> Response {
        let Request::Classify(req) = request else {
            return Response::error("oracle classifier only handles classify requests");
        };
        if req.items.is_empty() {
            return Response::error("empty items");
        }
        let mut labels = Vec::with_capacity(req.items.len());
        for item in req.items {
            match oracle_classify(&item.text) {
                Ok((lean, confidence)) => labels.push(LabelRecord {
                    id: item.id,
                    label: lean.as_str().to_string(),
                    confidence,
                }),
                Err(e) => return Response::error(e.to_string()),
            }
        }
        Response::Classify(ClassifyResponse { labels })
    }
}

/// Splits on the conjunction " but "; anything else comes back unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockSplitter {
    pub fail: bool,
}

impl Handler for MockSplitter {
    fn handle(&self, request: Request) -> Response {
        let Request::Split(req) = request else {
            return Response::error("mock splitter only handles split requests");
        };
        if self.fail {
            return Response::error("mock splitter configured to fail");
        }
        let text = req.text.trim();
        let body = text.strip_suffix('.').unwrap_or(text);
        let propositions = if body.contains(" but ") {
            body.split(" but ").map(|p| format!("{}.", p.trim())).collect()
        } else {
            vec![text.to_string()]
        };
        Response::Split(SplitResponse {
            id: Some(req.id),
            propositions,
        })
    }
}
