//! Wire types for the newline-delimited JSON adapter protocol.
//!
//! Requests carry a `"kind"` tag; responses are plain objects. Any response
//! may instead be an error envelope `{"error": "..."}`.

use serde::{Deserialize, Serialize};

/// Instruction sent to proposition-splitting endpoints, followed by the text.
pub const SPLIT_PROMPT: &str = "Split the following sentences into simple propositions without introducing new information, do it sentence by sentence: \n\n Sentences:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Request {
    Summarize(SummarizeRequest),
    Classify(ClassifyRequest),
    Split(SplitRequest),
}

impl Request {
    /// HTTP route and log label for the request.
    pub fn route(&self) -> &'static str {
        match self {
            Request::Summarize(_) => "summarize",
            Request::Classify(_) => "classify",
            Request::Split(_) => "split",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeRequest {
    pub instance_id: String,
    pub documents: Vec<String>,
    pub min_words: Option<u32>,
    pub max_words: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyItem {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub items: Vec<ClassifyItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRequest {
    pub id: String,
    pub text: String,
    /// [`SPLIT_PROMPT`], a space, then `text`. LLM-backed splitters send it as is.
    pub prompt: String,
}

impl SplitRequest {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        SplitRequest {
            id: id.into(),
            prompt: format!("{SPLIT_PROMPT} {text}"),
            text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeResponse {
    pub instance_id: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub labels: Vec<LabelRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResponse {
    #[serde(default)]
    pub id: Option<String>,
    pub propositions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Response {
    Summarize(SummarizeResponse),
    Classify(ClassifyResponse),
    Split(SplitResponse),
    Error(ErrorResponse),
}

impl Response {
    pub fn error(message: impl Into<String>) -> Self {
        Response::Error(ErrorResponse { error: message.into() })
    }
}
