//! External summarizers, stance classifiers and proposition splitters.
//!
//! Every adapter speaks the same newline-delimited JSON protocol, over a
//! child process's stdio or over HTTP. The harness never sees model
//! internals, only predictions.

pub mod protocol;
pub mod transport;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Lean;
use crate::scenario::ScenarioInstance;
use crate::segmenter::Segmenter;
use protocol::{
    ClassifyItem, ClassifyRequest, ClassifyResponse, Request, SplitRequest, SplitResponse, SummarizeRequest,
    SummarizeResponse,
};
use transport::{AttemptError, Handler, HttpTransport, InProcess, SubprocessTransport, Transport};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_MAX_RETRIES: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Summarizer,
    Classifier,
    Splitter,
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdapterKind::Summarizer => "summarizer",
            AdapterKind::Classifier => "classifier",
            AdapterKind::Splitter => "splitter",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TransportSpec {
    Subprocess { command: String },
    Http { base_url: String },
}

impl FromStr for TransportSpec {
    type Err = AdapterError;

    /// `cmd:<shell command>`, `http:<url>` or a bare `http(s)://` URL.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(command) = s.strip_prefix("cmd:") {
            if command.trim().is_empty() {
                return Err(AdapterError::Precondition("empty adapter command".into()));
            }
            return Ok(TransportSpec::Subprocess {
                command: command.trim().to_string(),
            });
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(TransportSpec::Http {
                base_url: s.to_string(),
            });
        }
        if let Some(rest) = s.strip_prefix("http:") {
            return Ok(TransportSpec::Http {
                base_url: rest.to_string(),
            });
        }
        Err(AdapterError::Precondition(format!(
            "adapter spec {s:?} must start with `cmd:` or `http:`"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterEndpoint {
    pub kind: AdapterKind,
    pub transport: TransportSpec,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    pub max_retries: u32,
}

impl AdapterEndpoint {
    pub fn new(kind: AdapterKind, transport: TransportSpec) -> Self {
        AdapterEndpoint {
            kind,
            transport,
            timeout: DEFAULT_TIMEOUT,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    pub fn parse(kind: AdapterKind, spec: &str) -> Result<Self, AdapterError> {
        Ok(Self::new(kind, spec.parse()?))
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("no prediction for item {0:?}")]
    MissingPrediction(String),
    #[error("prediction for unknown item {0:?}")]
    UnexpectedPrediction(String),
    #[error("more than one prediction for item {0:?}")]
    DuplicatePrediction(String),
    #[error("item {id:?}: label {label:?} is not left or right")]
    InvalidLabel { id: String, label: String },
    #[error("item {id:?}: confidence {value} outside [0, 1]")]
    InvalidConfidence { id: String, value: f64 },
    #[error("response echoes instance {got:?}, expected {expected:?}")]
    InstanceMismatch { expected: String, got: String },
    #[error("summary is empty")]
    EmptySummary,
    #[error("splitter returned no propositions")]
    EmptyPropositions,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("adapter reported error: {0}")]
    Remote(String),
    #[error("untagged text {0:?}")]
    UntaggedText(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdapterError {
    #[error("adapter timed out after {attempts} attempt(s) of {timeout:?}")]
    Timeout { attempts: u32, timeout: Duration },
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// A connected adapter: a transport plus the retry policy.
#[derive(Clone)]
pub struct Adapter {
    kind: AdapterKind,
    transport: Arc<dyn Transport>,
    max_retries: u32,
    timeout: Duration,
}

impl fmt::Debug for Adapter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Adapter")
            .field("kind", &self.kind)
            .field("max_retries", &self.max_retries)
            .finish_non_exhaustive()
    }
}

impl Adapter {
    /// `processes` bounds how many subprocess copies may serve requests
    /// concurrently; it is ignored for HTTP.
    pub fn connect(endpoint: &AdapterEndpoint, processes: usize) -> Result<Self, AdapterError> {
        if endpoint.timeout.is_zero() {
            return Err(AdapterError::Precondition("timeout must be positive".into()));
        }
        let transport: Arc<dyn Transport> = match &endpoint.transport {
            TransportSpec::Subprocess { command } => {
                Arc::new(SubprocessTransport::new(command.clone(), endpoint.timeout, processes))
            }
            TransportSpec::Http { base_url } => Arc::new(HttpTransport::new(base_url.clone(), endpoint.timeout)),
        };
        Ok(Adapter {
            kind: endpoint.kind,
            transport,
            max_retries: endpoint.max_retries,
            timeout: endpoint.timeout,
        })
    }

    pub fn in_process<H: Handler + 'static>(kind: AdapterKind, handler: H) -> Self {
        Self::from_transport(kind, InProcess::new(handler), 0)
    }

    pub fn from_transport<T: Transport + 'static>(kind: AdapterKind, transport: T, max_retries: u32) -> Self {
        Adapter {
            kind,
            transport: Arc::new(transport),
            max_retries,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn kind(&self) -> AdapterKind {
        self.kind
    }

    fn expect_kind(&self, kind: AdapterKind) -> Result<(), AdapterError> {
        if self.kind != kind {
            return Err(AdapterError::Precondition(format!(
                "expected a {kind} adapter, got a {}",
                self.kind
            )));
        }
        Ok(())
    }

    /// Send a request, retrying transport failures up to `max_retries` times
    /// with the identical payload.
    fn request(&self, request: &Request) -> Result<Value, AdapterError> {
        let body = serde_json::to_string(request).map_err(|e| AdapterError::Precondition(e.to_string()))?;
        let attempts = self.max_retries + 1;
        let mut last = AttemptError::Io("no attempt made".into());
        for attempt in 1..=attempts {
            match self.transport.send(request, &body) {
                Ok(line) => return parse_envelope(&line),
                Err(e) => {
                    log::warn!("{} request attempt {attempt}/{attempts} failed: {e:?}", request.route());
                    last = e;
                }
            }
        }
        Err(match last {
            AttemptError::Timeout => AdapterError::Timeout {
                attempts,
                timeout: self.timeout,
            },
            AttemptError::Io(message) => AdapterError::Transport { attempts, message },
        })
    }
}

fn parse_envelope(line: &str) -> Result<Value, AdapterError> {
    let value: Value = serde_json::from_str(line).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    if let Some(err) = value.get("error") {
        let message = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
        return Err(ProtocolError::Remote(message).into());
    }
    Ok(value)
}

fn decode<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, AdapterError> {
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()).into())
}

/// Word-count hint passed to summarizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordRange {
    pub min_words: u32,
    pub max_words: u32,
}

impl WordRange {
    /// 90% to 110% of a gold summary length.
    pub fn around(gold_words: u32) -> Self {
        WordRange {
            min_words: gold_words * 9 / 10,
            max_words: (gold_words * 11).div_ceil(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub instance_id: String,
    pub summary_text: String,
    pub word_count: usize,
    #[serde(default)]
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SummaryRecord {
    pub fn ok(instance_id: impl Into<String>, summary_text: impl Into<String>) -> Self {
        let summary_text = summary_text.into();
        SummaryRecord {
            instance_id: instance_id.into(),
            word_count: summary_text.split_whitespace().count(),
            summary_text,
            failed: false,
            error: None,
        }
    }

    pub fn failed(instance_id: impl Into<String>, error: impl fmt::Display) -> Self {
        SummaryRecord {
            instance_id: instance_id.into(),
            summary_text: String::new(),
            word_count: 0,
            failed: true,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierPrediction {
    pub item_id: String,
    pub label: Lean,
    pub confidence: f64,
}

pub fn summarize(
    adapter: &Adapter,
    instance: &ScenarioInstance,
    documents: &[String],
    target_words: Option<WordRange>,
) -> Result<SummaryRecord, AdapterError> {
    adapter.expect_kind(AdapterKind::Summarizer)?;
    if documents.is_empty() {
        return Err(AdapterError::Precondition("no documents to summarize".into()));
    }
    let request = Request::Summarize(SummarizeRequest {
        instance_id: instance.instance_id.clone(),
        documents: documents.to_vec(),
        min_words: target_words.map(|r| r.min_words),
        max_words: target_words.map(|r| r.max_words),
    });
    let response: SummarizeResponse = decode(adapter.request(&request)?)?;
    if response.instance_id != instance.instance_id {
        return Err(ProtocolError::InstanceMismatch {
            expected: instance.instance_id.clone(),
            got: response.instance_id,
        }
        .into());
    }
    if response.summary.trim().is_empty() {
        return Err(ProtocolError::EmptySummary.into());
    }
    Ok(SummaryRecord::ok(response.instance_id, response.summary))
}

/// Classify `(id, text)` items. Predictions come back in request order; the
/// response must cover every id exactly once.
pub fn classify_batch(
    adapter: &Adapter,
    items: &[(String, String)],
) -> Result<Vec<ClassifierPrediction>, AdapterError> {
    adapter.expect_kind(AdapterKind::Classifier)?;
    if items.is_empty() {
        return Err(AdapterError::Precondition("no items to classify".into()));
    }
    let mut ids = HashSet::with_capacity(items.len());
    for (id, _) in items {
        if !ids.insert(id.as_str()) {
            return Err(AdapterError::Precondition(format!("duplicate item id {id:?}")));
        }
    }
    let request = Request::Classify(ClassifyRequest {
        items: items
            .iter()
            .map(|(id, text)| ClassifyItem {
                id: id.clone(),
                text: text.clone(),
            })
            .collect(),
    });
    let response: ClassifyResponse = decode(adapter.request(&request)?)?;
    match_predictions(items, response)
}

fn match_predictions(
    items: &[(String, String)],
    response: ClassifyResponse,
) -> Result<Vec<ClassifierPrediction>, AdapterError> {
    let requested: HashSet<&str> = items.iter().map(|(id, _)| id.as_str()).collect();
    let mut by_id: HashMap<String, ClassifierPrediction> = HashMap::with_capacity(items.len());
    for record in response.labels {
        if !requested.contains(record.id.as_str()) {
            return Err(ProtocolError::UnexpectedPrediction(record.id).into());
        }
        let label: Lean = record.label.parse().map_err(|_| ProtocolError::InvalidLabel {
            id: record.id.clone(),
            label: record.label.clone(),
        })?;
        if !(0.0..=1.0).contains(&record.confidence) {
            return Err(ProtocolError::InvalidConfidence {
                id: record.id,
                value: record.confidence,
            }
            .into());
        }
        if by_id.contains_key(&record.id) {
            return Err(ProtocolError::DuplicatePrediction(record.id).into());
        }
        by_id.insert(
            record.id.clone(),
            ClassifierPrediction {
                item_id: record.id,
                label,
                confidence: record.confidence,
            },
        );
    }
    items
        .iter()
        .map(|(id, _)| {
            by_id
                .remove(id)
                .ok_or_else(|| ProtocolError::MissingPrediction(id.clone()).into())
        })
        .collect()
}

/// Where propositions come from: the rule-based segmenter or an endpoint.
#[derive(Debug, Clone)]
pub enum Splitter {
    Builtin(Segmenter),
    Endpoint { adapter: Adapter, fallback: Segmenter },
}

impl Default for Splitter {
    fn default() -> Self {
        Splitter::Builtin(Segmenter::default())
    }
}

impl Splitter {
    pub fn endpoint(adapter: Adapter) -> Self {
        Splitter::Endpoint {
            adapter,
            fallback: Segmenter::default(),
        }
    }

    pub fn segmenter(&self) -> &Segmenter {
        match self {
            Splitter::Builtin(s) => s,
            Splitter::Endpoint { fallback, .. } => fallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitOutcome {
    pub propositions: Vec<String>,
    /// The endpoint failed and the rule-based segmentation was used instead.
    pub degraded: bool,
}

pub fn split_propositions(splitter: &Splitter, id: &str, text: &str) -> Result<SplitOutcome, AdapterError> {
    if text.trim().is_empty() {
        return Err(AdapterError::Precondition("cannot split empty text".into()));
    }
    let builtin = |segmenter: &Segmenter, degraded| SplitOutcome {
        propositions: segmenter.split(text),
        degraded,
    };
    match splitter {
        Splitter::Builtin(segmenter) => Ok(builtin(segmenter, false)),
        Splitter::Endpoint { adapter, fallback } => match request_split(adapter, id, text) {
            Ok(propositions) => Ok(SplitOutcome {
                propositions,
                degraded: false,
            }),
            Err(e) => {
                log::warn!("splitter failed for {id}: {e}; falling back to rule-based segmentation");
                Ok(builtin(fallback, true))
            }
        },
    }
}

fn request_split(adapter: &Adapter, id: &str, text: &str) -> Result<Vec<String>, AdapterError> {
    adapter.expect_kind(AdapterKind::Splitter)?;
    let request = Request::Split(SplitRequest::new(id, text));
    let response: SplitResponse = decode(adapter.request(&request)?)?;
    let propositions: Vec<String> = response
        .propositions
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect();
    if propositions.is_empty() {
        return Err(ProtocolError::EmptyPropositions.into());
    }
    Ok(propositions)
}
