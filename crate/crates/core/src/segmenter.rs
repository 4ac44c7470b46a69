//! Summary segmentation and minority weighting.
//!
//! A summary becomes a list of [`WeightedSentence`]s: rule-based sentence
//! splitting, optional proposition splitting per sentence, then the
//! minority rule (items mentioning "the minority" get a reduced weight).

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{split_propositions, AdapterError, Splitter, SummaryRecord};

/// Phrase marking minority opinions in templated summaries.
pub const MINORITY_MARKER: &str = "the minority";

const DEFAULT_ABBREVIATIONS: &str = include_str!("abbreviations.txt");

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("summary for {instance_id} has no sentences with alphabetic content")]
    EmptySegmentation { instance_id: String },
    #[error("minority weight must be in (0, 1], got {0}")]
    InvalidMinorityWeight(f64),
    #[error("cannot read abbreviation list: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSentence {
    pub sentence_id: String,
    pub instance_id: String,
    pub text: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MinorityWeight(f64);

impl MinorityWeight {
    pub const HALF: MinorityWeight = MinorityWeight(0.5);
    pub const DISABLED: MinorityWeight = MinorityWeight(1.0);

    pub fn new(weight: f64) -> Result<Self, SegmentError> {
        if weight > 0.0 && weight <= 1.0 {
            Ok(MinorityWeight(weight))
        } else {
            Err(SegmentError::InvalidMinorityWeight(weight))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for MinorityWeight {
    fn default() -> Self {
        Self::HALF
    }
}

impl TryFrom<f64> for MinorityWeight {
    type Error = SegmentError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<MinorityWeight> for f64 {
    fn from(w: MinorityWeight) -> f64 {
        w.0
    }
}

/// Rule-based sentence splitter on `.`, `!` and `?`.
///
/// A single period does not end a sentence after a known abbreviation or
/// when the next word starts in lowercase; an ellipsis ends one only before
/// an uppercase word or the end of text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmenter {
    abbreviations: BTreeSet<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter::with_abbreviations(parse_abbreviations(DEFAULT_ABBREVIATIONS))
    }
}

fn parse_abbreviations(list: &str) -> impl Iterator<Item = String> + '_ {
    list.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.trim_end_matches('.').to_lowercase())
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’' | '»')
}

impl Segmenter {
    pub fn with_abbreviations<I: IntoIterator<Item = String>>(abbreviations: I) -> Self {
        Segmenter {
            abbreviations: abbreviations.into_iter().collect(),
        }
    }

    /// One abbreviation per line, `#` starts a comment, trailing periods optional.
    pub fn from_abbreviation_file(path: &Path) -> Result<Self, SegmentError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Segmenter::with_abbreviations(
            parse_abbreviations(&text).collect::<Vec<_>>(),
        ))
    }

    /// Split into trimmed sentences, dropping fragments without letters.
    pub fn split(&self, text: &str) -> Vec<String> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut sentences = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            if !is_terminal(chars[i].1) {
                i += 1;
                continue;
            }
            let run_start = i;
            while i < chars.len() && is_terminal(chars[i].1) {
                i += 1;
            }
            let run: String = chars[run_start..i].iter().map(|(_, c)| *c).collect();
            while i < chars.len() && is_closer(chars[i].1) {
                i += 1;
            }
            let at_end = i == chars.len();
            if !at_end && !chars[i].1.is_whitespace() {
                continue;
            }
            let next_word = chars[i..].iter().map(|(_, c)| *c).find(|c| !c.is_whitespace());
            let boundary = if run == "." {
                !self.is_abbreviation(text, chars[run_start].0) && !next_word.is_some_and(char::is_lowercase)
            } else if run.contains("..") || run.contains('…') {
                next_word.is_none_or(|c| !c.is_lowercase())
            } else {
                true
            };
            if boundary {
                let end = if at_end { text.len() } else { chars[i].0 };
                push_sentence(&mut sentences, &text[start..end]);
                start = end;
            }
        }
        push_sentence(&mut sentences, &text[start..]);
        sentences
    }

    fn is_abbreviation(&self, text: &str, period_at: usize) -> bool {
        let before = &text[..period_at];
        let token = before
            .rsplit(char::is_whitespace)
            .next()
            .unwrap_or("")
            .trim_start_matches(|c: char| !c.is_alphanumeric());
        !token.is_empty() && self.abbreviations.contains(&token.to_lowercase())
    }
}

fn push_sentence(out: &mut Vec<String>, fragment: &str) {
    let trimmed = fragment.trim();
    if trimmed.chars().any(char::is_alphabetic) {
        out.push(trimmed.to_string());
    }
}

fn sentence_id(instance_id: &str, index: usize) -> String {
    format!("{instance_id}-s{index:03}")
}

pub fn segment_sentences(
    summary: &SummaryRecord,
    segmenter: &Segmenter,
) -> Result<Vec<WeightedSentence>, SegmentError> {
    let sentences = segmenter.split(&summary.summary_text);
    if sentences.is_empty() {
        return Err(SegmentError::EmptySegmentation {
            instance_id: summary.instance_id.clone(),
        });
    }
    Ok(sentences
        .into_iter()
        .enumerate()
        .map(|(i, text)| WeightedSentence {
            sentence_id: sentence_id(&summary.instance_id, i),
            instance_id: summary.instance_id.clone(),
            text,
            weight: 1.0,
        })
        .collect())
}

pub fn is_minority(text: &str) -> bool {
    text.to_lowercase().contains(MINORITY_MARKER)
}

pub fn apply_minority_weights(
    sentences: Vec<WeightedSentence>,
    minority_weight: MinorityWeight,
) -> Vec<WeightedSentence> {
    sentences
        .into_iter()
        .map(|mut s| {
            s.weight = if is_minority(&s.text) {
                minority_weight.get()
            } else {
                1.0
            };
            s
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub sentences: Vec<WeightedSentence>,
    pub splitter_degraded: bool,
}

/// Segment, split each sentence into propositions, then weight.
///
/// Propositions inherit their parent's minority status, so a proposition
/// split out of a "the minority ..." sentence keeps the reduced weight even
/// if the marker phrase itself landed in a sibling proposition.
pub fn prepare_classifiables(
    summary: &SummaryRecord,
    splitter: &Splitter,
    minority_weight: MinorityWeight,
) -> Result<Prepared, SegmentError> {
    let sentences = segment_sentences(summary, splitter.segmenter())?;
    let mut out = Vec::new();
    let mut degraded = false;
    for sentence in sentences {
        let outcome = split_propositions(splitter, &sentence.sentence_id, &sentence.text)?;
        degraded |= outcome.degraded;
        let weight = if is_minority(&sentence.text) {
            minority_weight.get()
        } else {
            1.0
        };
        let single = outcome.propositions.len() == 1;
        for (j, text) in outcome.propositions.into_iter().enumerate() {
            let weight = if is_minority(&text) {
                minority_weight.get()
            } else {
                weight
            };
            out.push(WeightedSentence {
                sentence_id: if single {
                    sentence.sentence_id.clone()
                } else {
                    format!("{}-p{j:02}", sentence.sentence_id)
                },
                instance_id: sentence.instance_id.clone(),
                text,
                weight,
            });
        }
    }
    if out.is_empty() {
        return Err(SegmentError::EmptySegmentation {
            instance_id: summary.instance_id.clone(),
        });
    }
    Ok(Prepared {
        sentences: out,
        splitter_degraded: degraded,
    })
}

pub fn write_sentences<W: Write>(mut out: W, sentences: &[WeightedSentence]) -> std::io::Result<()> {
    for s in sentences {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::protocol::{Request, Response, SplitResponse};
    use crate::adapters::transport::Handler;
    use crate::adapters::{Adapter, AdapterKind};

    fn split(text: &str) -> Vec<String> {
        Segmenter::default().split(text)
    }

    fn summary(text: &str) -> SummaryRecord {
        SummaryRecord::ok("equal-0001", text)
    }

    #[test]
    fn basic_terminal_punctuation() {
        assert_eq!(split("A wins. B loses!"), ["A wins.", "B loses!"]);
        assert_eq!(split("Really? Yes."), ["Really?", "Yes."]);
        assert_eq!(split("No terminator here"), ["No terminator here"]);
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(
            split("Dr. Smith voted. So did Ms. Lee."),
            ["Dr. Smith voted.", "So did Ms. Lee."]
        );
        assert_eq!(
            split("The U.S. Senate met. Sen. Jones spoke."),
            ["The U.S. Senate met.", "Sen. Jones spoke."]
        );
    }

    #[test]
    fn ellipsis_and_decimals() {
        assert_eq!(split("..."), Vec::<String>::new());
        assert_eq!(
            split("He paused... then left. Done."),
            ["He paused... then left.", "Done."]
        );
        assert_eq!(split("Wait... Then go."), ["Wait...", "Then go."]);
        assert_eq!(
            split("Rates rose 3.5 points. Fine."),
            ["Rates rose 3.5 points.", "Fine."]
        );
    }

    #[test]
    fn quotes_stay_with_their_sentence() {
        assert_eq!(split("He said \"no.\" She left."), ["He said \"no.\"", "She left."]);
    }

    #[test]
    fn empty_segmentation_errors() {
        let err = segment_sentences(&summary("..."), &Segmenter::default()).unwrap_err();
        assert!(matches!(err, SegmentError::EmptySegmentation { .. }));
        let err = segment_sentences(&summary("12. 34!"), &Segmenter::default()).unwrap_err();
        assert!(matches!(err, SegmentError::EmptySegmentation { .. }));
    }

    #[test]
    fn custom_abbreviation_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abbr.txt");
        std::fs::write(&path, "# custom\nApprox.\n").unwrap();
        let seg = Segmenter::from_abbreviation_file(&path).unwrap();
        assert_eq!(
            seg.split("It cost approx. Ten dollars."),
            ["It cost approx. Ten dollars."]
        );
        assert_eq!(seg.split("Dr. Who came."), ["Dr.", "Who came."]);
    }

    #[test]
    fn minority_weighting() {
        let sentences = segment_sentences(&summary("Most say A. The minority say B."), &Segmenter::default()).unwrap();
        let weighted = apply_minority_weights(sentences.clone(), MinorityWeight::HALF);
        let weights: Vec<f64> = weighted.iter().map(|s| s.weight).collect();
        assert_eq!(weights, [1.0, 0.5]);
        let unweighted = apply_minority_weights(sentences, MinorityWeight::DISABLED);
        assert!(unweighted.iter().all(|s| s.weight == 1.0));

        let shout = segment_sentences(&summary("THE MINORITY disagree."), &Segmenter::default()).unwrap();
        assert_eq!(apply_minority_weights(shout, MinorityWeight::HALF)[0].weight, 0.5);
    }

    #[test]
    fn minority_weight_bounds() {
        assert!(MinorityWeight::new(0.0).is_err());
        assert!(MinorityWeight::new(1.2).is_err());
        assert!(MinorityWeight::new(f64::NAN).is_err());
        assert_eq!(MinorityWeight::new(1.0).unwrap(), MinorityWeight::DISABLED);
    }

    struct ButSplitter;

    impl Handler for ButSplitter {
        fn handle(&self, request: Request) -> Response {
            let Request::Split(req) = request else {
                return Response::error("wrong kind");
            };
            let body = req.text.trim_end_matches('.');
            Response::Split(SplitResponse {
                id: Some(req.id),
                propositions: body.split(" but ").map(|p| format!("{p}.")).collect(),
            })
        }
    }

    #[test]
    fn propositions_inherit_minority_weight() {
        let splitter = Splitter::endpoint(Adapter::in_process(AdapterKind::Splitter, ButSplitter));
        let prepared = prepare_classifiables(
            &summary("Most back the plan but the minority oppose it."),
            &splitter,
            MinorityWeight::HALF,
        )
        .unwrap();
        let texts: Vec<&str> = prepared.sentences.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["Most back the plan.", "the minority oppose it."]);
        let weights: Vec<f64> = prepared.sentences.iter().map(|s| s.weight).collect();
        // The parent sentence carries the marker, so both halves are reduced.
        assert_eq!(weights, [0.5, 0.5]);
        assert_eq!(prepared.sentences[0].sentence_id, "equal-0001-s000-p00");
        assert!(!prepared.splitter_degraded);

        let two = prepare_classifiables(
            &summary("Most back the plan but some oppose it. The minority want delay."),
            &splitter,
            MinorityWeight::HALF,
        )
        .unwrap();
        let weights: Vec<f64> = two.sentences.iter().map(|s| s.weight).collect();
        assert_eq!(weights, [1.0, 1.0, 0.5]);
    }

    #[test]
    fn builtin_splitter_keeps_sentences() {
        let prepared =
            prepare_classifiables(&summary("One. Two. Three."), &Splitter::default(), MinorityWeight::HALF).unwrap();
        assert_eq!(prepared.sentences.len(), 3);
        assert!(prepared.sentences.iter().all(|s| s.weight == 1.0));
        assert_eq!(prepared.sentences[2].sentence_id, "equal-0001-s002");
    }

    #[test]
    fn failed_splitter_degrades_to_segmentation() {
        struct Down;
        impl Handler for Down {
            fn handle(&self, _: Request) -> Response {
                Response::error("upstream 503")
            }
        }
        let splitter = Splitter::endpoint(Adapter::in_process(AdapterKind::Splitter, Down));
        let s = summary("Most back the plan but some oppose it. Others abstain.");
        let prepared = prepare_classifiables(&s, &splitter, MinorityWeight::HALF).unwrap();
        let plain = segment_sentences(&s, &Segmenter::default()).unwrap();
        assert_eq!(prepared.sentences, plain);
        assert!(prepared.splitter_degraded);
    }

    proptest::proptest! {
        #[test]
        fn segmentation_is_idempotent(words in proptest::collection::vec("[A-Za-z]{1,6}|Dr\\.|\\.|!|\\?|\\.\\.\\.|, ", 1..30)) {
            let text = words.join(" ");
            let seg = Segmenter::default();
            for sentence in seg.split(&text) {
                proptest::prop_assert_eq!(seg.split(&sentence), vec![sentence.clone()]);
            }
        }

        #[test]
        fn total_weight_matches_counts(flags in proptest::collection::vec(proptest::bool::ANY, 1..40), w in 0.05f64..=1.0) {
            let text: String = flags
                .iter()
                .enumerate()
                .map(|(i, m)| if *m { format!("The minority hold view {i}. ") } else { format!("Most hold view {i}. ") })
                .collect();
            let weighted = apply_minority_weights(
                segment_sentences(&summary(&text), &Segmenter::default()).unwrap(),
                MinorityWeight::new(w).unwrap(),
            );
            let minority = flags.iter().filter(|m| **m).count() as f64;
            let total: f64 = weighted.iter().map(|s| s.weight).sum();
            proptest::prop_assert!((total - ((flags.len() as f64 - minority) + w * minority)).abs() < 1e-9);
        }
    }
}
