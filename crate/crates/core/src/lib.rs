//! Fairness audits for opinion summarizers.
//!
//! Scenario instances with a fixed left/right input mix are summarized by an
//! external model, the summary is split into sentences, each sentence is
//! labelled by a stance classifier, and the shift between input and summary
//! stance proportions is reported as a second-order statistical parity
//! difference.
//!
//! The numeric core is generic over [`Scalar`]; the aliases below fix the
//! scalar for the common cases.

pub mod adapters;
pub mod corpus;
pub mod fairmetrics;
pub mod pipeline;
pub mod report;
pub mod rouge;
pub mod scalar;
pub mod scenario;
pub mod segmenter;
pub mod simkit;

pub use adapters::{Adapter, AdapterEndpoint, AdapterError, ClassifierPrediction, Splitter, SummaryRecord};
pub use corpus::{Corpus, Lean, Stance, StanceDocument};
pub use fairmetrics::{FairnessScore, PairedTestResult, SpdParts, StanceProportions};
pub use pipeline::{RunConfig, RunOutcome};
pub use report::AuditRow;
pub use scalar::{Rational, Scalar};
pub use scenario::{ScenarioInstance, ScenarioSpec};
pub use segmenter::{MinorityWeight, Segmenter, WeightedSentence};

pub type Proportions = StanceProportions<f64>;
pub type ExactProportions = StanceProportions<Rational>;
pub type Score = FairnessScore<f64>;
pub type ExactScore = FairnessScore<Rational>;
pub type TestResult = PairedTestResult<f64>;
pub type Rouge = rouge::RougeScore<f64>;
