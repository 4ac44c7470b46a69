//! End-to-end audit runs: sample scenarios, drive the adapters, and score.
//!
//! Every stage appends one JSON record per line to its own file in the run
//! directory. A resumed run reloads those files and skips instances that
//! already have a successful prediction record; scoring joins the files by
//! `instance_id`, so completion order never reaches the outputs.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{
    classify_batch, summarize, Adapter, AdapterEndpoint, AdapterKind, ClassifierPrediction, Splitter, SummaryRecord,
    WordRange,
};
use crate::corpus::{filter_opinionated, load_corpus, stance_pools, Corpus, CorpusError, CorpusFormat};
use crate::fairmetrics::{
    aggregate_scores, observations, observed_proportions, paired_test_for, second_order_spd, FairnessScore,
    PairedTestResult, StanceProportions,
};
use crate::report::{render_csv, render_markdown, AuditRow, ReportError};
use crate::rouge::{self, RougeScore};
use crate::scenario::{builtin_specs, sample_instances, ScenarioError, ScenarioInstance, ScenarioSpec};
use crate::segmenter::{prepare_classifiables, write_sentences, MinorityWeight, Segmenter, WeightedSentence};
use crate::simkit::{synthetic_corpus, tagged_corpus, OracleBias, OracleClassifier, OracleSummarizer};

pub const CONFIG_FILE: &str = "config.json";
pub const SCENARIOS_FILE: &str = "scenarios.jsonl";
pub const SUMMARIES_FILE: &str = "summaries.jsonl";
pub const SENTENCES_FILE: &str = "sentences.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const SCORES_FILE: &str = "scores.csv";
pub const TTESTS_FILE: &str = "ttests.csv";
pub const REPORT_CSV_FILE: &str = "report.csv";
pub const REPORT_MD_FILE: &str = "report.md";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("missing run artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("no instance could be scored")]
    NothingScored,
    #[error("existing {0} was produced by a different configuration; rerun without --resume or use a fresh directory")]
    ResumeMismatch(PathBuf),
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A named input mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mix {
    pub name: String,
    pub p_left: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleTransport {
    InProcess,
    Subprocess,
}

/// Present when the run is driven by the synthetic oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub bias: OracleBias<f64>,
    pub sentences: usize,
    pub transport: OracleTransport,
    /// Size of each side of the synthetic corpus when no corpus file is given.
    pub synthetic_pool: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SplitterConfig {
    Builtin,
    Endpoint { endpoint: AdapterEndpoint },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub instances: usize,
    pub size: usize,
    /// Empty means the three builtin mixes.
    #[serde(default)]
    pub mixes: Vec<Mix>,
    pub summarizer: Option<AdapterEndpoint>,
    pub classifier: Option<AdapterEndpoint>,
    pub splitter: SplitterConfig,
    pub minority_weight: MinorityWeight,
    pub confidence_threshold: f64,
    pub concurrency: usize,
    pub model: String,
    pub method: String,
    #[serde(default)]
    pub target_words: Option<WordRange>,
    #[serde(default)]
    pub abbreviations: Option<PathBuf>,
    #[serde(default)]
    pub references: Option<PathBuf>,
    #[serde(default)]
    pub oracle: Option<OracleSettings>,
}

impl RunConfig {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        RunConfig {
            corpus: None,
            out: out.into(),
            seed: 0,
            instances: 100,
            size: 20,
            mixes: Vec::new(),
            summarizer: None,
            classifier: None,
            splitter: SplitterConfig::Builtin,
            minority_weight: MinorityWeight::HALF,
            confidence_threshold: 0.0,
            concurrency: 4,
            model: "model".into(),
            method: "default".into(),
            target_words: None,
            abbreviations: None,
            references: None,
            oracle: None,
        }
    }

    pub fn specs(&self) -> Result<Vec<ScenarioSpec>, ScenarioError> {
        if self.mixes.is_empty() {
            return builtin_specs(self.instances, self.size, self.seed);
        }
        self.mixes
            .iter()
            .map(|m| {
                ScenarioSpec::new(
                    &m.name,
                    m.p_left,
                    self.instances,
                    self.size,
                    crate::scenario::derive_seed(self.seed, &m.name, None),
                )
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(PipelineError::Config(format!(
                "confidence threshold {} outside [0, 1]",
                self.confidence_threshold
            )));
        }
        if self.concurrency == 0 {
            return Err(PipelineError::Config("concurrency must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::BadRecord {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        fs::write(path, text).map_err(io_err(path))
    }
}

/// The connected adapters a run talks to.
pub struct Adapters {
    pub summarizer: Adapter,
    pub classifier: Adapter,
    pub splitter: Splitter,
}

impl Adapters {
    /// Build the adapters a config describes. With in-process oracle
    /// settings the synthetic doubles are used and the endpoints ignored.
    pub fn from_config(config: &RunConfig) -> Result<Self, PipelineError> {
        let segmenter = match &config.abbreviations {
            Some(path) => Segmenter::from_abbreviation_file(path).map_err(|e| PipelineError::Config(e.to_string()))?,
            None => Segmenter::default(),
        };
        if let Some(oracle) = config
            .oracle
            .as_ref()
            .filter(|o| o.transport == OracleTransport::InProcess)
        {
            return Ok(Adapters {
                summarizer: Adapter::in_process(
                    AdapterKind::Summarizer,
                    OracleSummarizer::new(oracle.bias, oracle.sentences),
                ),
                classifier: Adapter::in_process(AdapterKind::Classifier, OracleClassifier),
                splitter: Splitter::Builtin(segmenter),
            });
        }
        let connect = |endpoint: &Option<AdapterEndpoint>, kind: AdapterKind| {
            let endpoint = endpoint
                .as_ref()
                .ok_or_else(|| PipelineError::Config(format!("no {kind} endpoint configured")))?;
            Adapter::connect(endpoint, config.concurrency).map_err(|e| PipelineError::Config(e.to_string()))
        };
        let splitter = match &config.splitter {
            SplitterConfig::Builtin => Splitter::Builtin(segmenter),
            SplitterConfig::Endpoint { endpoint } => Splitter::Endpoint {
                adapter: connect(&Some(endpoint.clone()), AdapterKind::Splitter)?,
                fallback: segmenter,
            },
        };
        Ok(Adapters {
            summarizer: connect(&config.summarizer, AdapterKind::Summarizer)?,
            classifier: connect(&config.classifier, AdapterKind::Classifier)?,
            splitter,
        })
    }
}

/// The corpus a config runs on. Oracle runs get stance tags added, or a
/// synthetic corpus when no file is named.
pub fn prepare_corpus(config: &RunConfig) -> Result<Corpus, PipelineError> {
    let loaded = match &config.corpus {
        Some(path) => Some(load_corpus(path, CorpusFormat::from_path(path))?),
        None => None,
    };
    match (&config.oracle, loaded) {
        (Some(_), Some(corpus)) => Ok(tagged_corpus(&corpus)),
        (Some(oracle), None) => Ok(synthetic_corpus(oracle.synthetic_pool, oracle.synthetic_pool)),
        (None, Some(corpus)) => Ok(corpus),
        (None, None) => Err(PipelineError::Config("no corpus given".into())),
    }
}

/// Terminal per-instance record in `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub instance_id: String,
    pub status: InstanceStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub splitter_degraded: bool,
    #[serde(default)]
    pub predictions: Vec<ClassifierPrediction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOutcome {
    pub total: usize,
    pub completed: usize,
    pub failed: usize,
    /// Instances already complete from an earlier invocation.
    pub skipped: usize,
    pub summaries_requested: usize,
}

pub fn artifact(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Read a JSONL stage file. A final line without a newline is treated as
/// the remains of an interrupted write and ignored.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let mut text = String::new();
    File::open(path)
        .map_err(io_err(path))?
        .read_to_string(&mut text)
        .map_err(io_err(path))?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::BadRecord {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Cut a partially written last line so appends start on a fresh line.
fn repair_tail(path: &Path) -> Result<(), PipelineError> {
    if !path.exists() {
        return Ok(());
    }
    let mut file = OpenOptions::new()
        .read(true)
        .write(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map(|i| i + 1).unwrap_or(0);
    file.set_len(keep as u64).map_err(io_err(path))?;
    file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
    Ok(())
}

struct StageWriter {
    path: PathBuf,
    file: Mutex<File>,
}

impl StageWriter {
    fn open(path: PathBuf, truncate: bool) -> Result<Self, PipelineError> {
        if !truncate {
            repair_tail(&path)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(!truncate)
            .write(true)
            .truncate(truncate)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(StageWriter {
            path,
            file: Mutex::new(file),
        })
    }

    /// Write a whole buffer of lines under one lock.
    fn append(&self, buf: &[u8]) -> Result<(), PipelineError> {
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(buf)
            .and_then(|_| file.flush())
            .map_err(io_err(&self.path))
    }

    fn append_record<T: Serialize>(&self, record: &T) -> Result<(), PipelineError> {
        let mut line = serde_json::to_vec(record).expect("record serializes");
        line.push(b'\n');
        self.append(&line)
    }
}

/// Sample every scenario of `config` from the opinionated part of `corpus`.
pub fn build_instances(config: &RunConfig, corpus: &Corpus) -> Result<Vec<ScenarioInstance>, PipelineError> {
    let opinionated = filter_opinionated(corpus)?;
    let pools = stance_pools(&opinionated);
    let mut all = Vec::new();
    for spec in config.specs()? {
        all.extend(sample_instances(&spec, &pools)?);
    }
    Ok(all)
}

fn scenario_bytes(instances: &[ScenarioInstance]) -> Vec<u8> {
    let mut buf = Vec::new();
    crate::scenario::write_instances(&mut buf, instances).expect("in-memory write");
    buf
}

/// Run (or resume) the summarize → segment → classify stages.
pub fn run(
    config: &RunConfig,
    corpus: &Corpus,
    adapters: &Adapters,
    resume: bool,
) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    let dir = &config.out;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let instances = build_instances(config, corpus)?;

    let scenarios_path = artifact(dir, SCENARIOS_FILE);
    let fresh = scenario_bytes(&instances);
    if resume && scenarios_path.exists() {
        let existing = fs::read(&scenarios_path).map_err(io_err(&scenarios_path))?;
        if existing != fresh {
            return Err(PipelineError::ResumeMismatch(scenarios_path));
        }
    } else {
        fs::write(&scenarios_path, &fresh).map_err(io_err(&scenarios_path))?;
    }
    config.save(&artifact(dir, CONFIG_FILE))?;

    let summaries_path = artifact(dir, SUMMARIES_FILE);
    let predictions_path = artifact(dir, PREDICTIONS_FILE);
    let mut done_summaries: HashMap<String, SummaryRecord> = HashMap::new();
    let mut completed: HashMap<String, ()> = HashMap::new();
    if resume {
        if summaries_path.exists() {
            for record in read_records::<SummaryRecord>(&summaries_path)? {
                if !record.failed {
                    done_summaries.insert(record.instance_id.clone(), record);
                }
            }
        }
        if predictions_path.exists() {
            for record in read_records::<InstanceResult>(&predictions_path)? {
                if record.status == InstanceStatus::Ok {
                    completed.insert(record.instance_id, ());
                }
            }
        }
    }

    let summaries = StageWriter::open(summaries_path, !resume)?;
    let sentences = StageWriter::open(artifact(dir, SENTENCES_FILE), !resume)?;
    let predictions = StageWriter::open(predictions_path, !resume)?;

    let index = corpus.index();
    let pending: Vec<&ScenarioInstance> = instances
        .iter()
        .filter(|i| !completed.contains_key(&i.instance_id))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;

    let results: Vec<Result<(InstanceStatus, bool), PipelineError>> = pool.install(|| {
        pending
            .par_iter()
            .map(|instance| {
                let mut requested = false;
                let summary = match done_summaries.get(&instance.instance_id) {
                    Some(s) => s.clone(),
                    None => {
                        requested = true;
                        let docs: Vec<String> = instance
                            .document_ids
                            .iter()
                            .map(|id| index.get(id.as_str()).map(|d| d.text.clone()).unwrap_or_default())
                            .collect();
                        let record = summarize(&adapters.summarizer, instance, &docs, config.target_words)
                            .unwrap_or_else(|e| SummaryRecord::failed(&instance.instance_id, e));
                        summaries.append_record(&record)?;
                        record
                    }
                };
                let result = process_summary(&summary, config, adapters, &sentences);
                predictions.append_record(&result)?;
                Ok((result.status, requested))
            })
            .collect()
    });

    let mut outcome = RunOutcome {
        total: instances.len(),
        skipped: completed.len(),
        completed: completed.len(),
        ..RunOutcome::default()
    };
    for r in results {
        let (status, requested) = r?;
        outcome.summaries_requested += requested as usize;
        match status {
            InstanceStatus::Ok => outcome.completed += 1,
            InstanceStatus::Failed => outcome.failed += 1,
        }
    }
    Ok(outcome)
}

fn process_summary(
    summary: &SummaryRecord,
    config: &RunConfig,
    adapters: &Adapters,
    sentences_out: &StageWriter,
) -> InstanceResult {
    let failed = |error: String| InstanceResult {
        instance_id: summary.instance_id.clone(),
        status: InstanceStatus::Failed,
        error: Some(error),
        splitter_degraded: false,
        predictions: Vec::new(),
    };
    if summary.failed {
        return failed(summary.error.clone().unwrap_or_else(|| "summarization failed".into()));
    }
    let prepared = match prepare_classifiables(summary, &adapters.splitter, config.minority_weight) {
        Ok(p) => p,
        Err(e) => return failed(e.to_string()),
    };
    let mut buf = Vec::new();
    write_sentences(&mut buf, &prepared.sentences).expect("in-memory write");
    if let Err(e) = sentences_out.append(&buf) {
        return failed(e.to_string());
    }
    let items: Vec<(String, String)> = prepared
        .sentences
        .iter()
        .map(|s| (s.sentence_id.clone(), s.text.clone()))
        .collect();
    match classify_batch(&adapters.classifier, &items) {
        Ok(predictions) => InstanceResult {
            instance_id: summary.instance_id.clone(),
            status: InstanceStatus::Ok,
            error: None,
            splitter_degraded: prepared.splitter_degraded,
            predictions,
        },
        Err(e) => failed(e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub instance_id: String,
    pub references: Vec<String>,
}

/// Paired test over one scenario or over all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopedTest {
    pub scope: String,
    pub result: Option<PairedTestResult<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutcome {
    pub scores: Vec<FairnessScore<f64>>,
    pub excluded: Vec<(String, String)>,
    pub rows: Vec<AuditRow>,
    pub tests: Vec<ScopedTest>,
}

/// Join the stage files of a run directory and compute all scores.
pub fn score_dir(dir: &Path, config: &RunConfig) -> Result<ScoreOutcome, PipelineError> {
    let need = |name: &str| {
        let p = artifact(dir, name);
        if p.exists() {
            Ok(p)
        } else {
            Err(PipelineError::MissingArtifact(p))
        }
    };
    let instances: Vec<ScenarioInstance> = read_records(&need(SCENARIOS_FILE)?)?;
    let summaries: Vec<SummaryRecord> = read_records(&need(SUMMARIES_FILE)?)?;
    let sentences: Vec<WeightedSentence> = read_records(&need(SENTENCES_FILE)?)?;
    let results: Vec<InstanceResult> = read_records(&need(PREDICTIONS_FILE)?)?;
    if instances.is_empty() {
        return Err(PipelineError::MissingArtifact(artifact(dir, SCENARIOS_FILE)));
    }

    let mut by_instance: BTreeMap<&str, BTreeMap<&str, &WeightedSentence>> = BTreeMap::new();
    for s in &sentences {
        by_instance
            .entry(s.instance_id.as_str())
            .or_default()
            .insert(s.sentence_id.as_str(), s);
    }
    let mut final_result: HashMap<&str, &InstanceResult> = HashMap::new();
    for r in &results {
        let keep = match final_result.get(r.instance_id.as_str()) {
            Some(prev) => !(prev.status == InstanceStatus::Ok && r.status == InstanceStatus::Failed),
            None => true,
        };
        if keep {
            final_result.insert(&r.instance_id, r);
        }
    }
    let mut summary_text: HashMap<&str, &str> = HashMap::new();
    for s in summaries.iter().filter(|s| !s.failed) {
        summary_text.insert(&s.instance_id, &s.summary_text);
    }

    let mut ordered: Vec<&ScenarioInstance> = instances.iter().collect();
    ordered.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));

    let mut scores = Vec::new();
    let mut excluded = Vec::new();
    for instance in &ordered {
        let id = instance.instance_id.as_str();
        let Some(result) = final_result.get(id) else {
            excluded.push((id.to_string(), "not run".to_string()));
            continue;
        };
        if result.status == InstanceStatus::Failed {
            excluded.push((id.to_string(), result.error.clone().unwrap_or_default()));
            continue;
        }
        let sent: Vec<WeightedSentence> = result
            .predictions
            .iter()
            .filter_map(|p| {
                by_instance
                    .get(id)
                    .and_then(|m| m.get(p.item_id.as_str()))
                    .map(|s| (*s).clone())
            })
            .collect();
        let observed =
            match observed_proportions(&observations(&sent, &result.predictions), config.confidence_threshold) {
                Ok(p) => p,
                Err(e) => {
                    log::info!("excluding {id}: {e}");
                    excluded.push((id.to_string(), e.to_string()));
                    continue;
                }
            };
        let input = StanceProportions::<f64>::from_counts(instance.n_left, instance.n_right)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        scores.push(FairnessScore::new(
            id,
            &instance.scenario,
            second_order_spd(&input, &observed),
        ));
    }
    if scores.is_empty() {
        return Err(PipelineError::NothingScored);
    }

    let references = match &config.references {
        Some(path) => read_records::<ReferenceRecord>(path)?
            .into_iter()
            .map(|r| (r.instance_id, r.references))
            .collect(),
        None => HashMap::new(),
    };

    let mut scenario_names: Vec<String> = Vec::new();
    for i in &instances {
        if !scenario_names.contains(&i.scenario) {
            scenario_names.push(i.scenario.clone());
        }
    }
    let mut rows = Vec::new();
    let mut tests = Vec::new();
    for name in &scenario_names {
        let total = instances.iter().filter(|i| &i.scenario == name).count();
        let subset: Vec<FairnessScore<f64>> = scores.iter().filter(|s| &s.scenario == name).cloned().collect();
        let test = paired_test_for(&subset).ok();
        tests.push(ScopedTest {
            scope: name.clone(),
            result: test,
        });
        let Ok(agg) = aggregate_scores(&subset, total - subset.len()) else {
            continue;
        };
        let rouge_scores: Vec<RougeScore<f64>> = subset
            .iter()
            .filter_map(|s| {
                let refs = references.get(&s.instance_id)?;
                let text = summary_text.get(s.instance_id.as_str())?;
                let refs: Vec<&str> = refs.iter().map(String::as_str).collect();
                rouge::score(text, &refs).ok()
            })
            .collect();
        rows.push(AuditRow {
            model: config.model.clone(),
            method: config.method.clone(),
            scenario: name.clone(),
            mean_spd2: agg.mean,
            std: agg.std_dev,
            n_scored: agg.count,
            n_excluded: agg.excluded,
            t_stat: test.map(|t| t.t_statistic),
            p_value: test.map(|t| t.p_value),
            rouge: rouge::mean_score(&rouge_scores),
        });
    }
    tests.push(ScopedTest {
        scope: "pooled".into(),
        result: paired_test_for(&scores).ok(),
    });
    Ok(ScoreOutcome {
        scores,
        excluded,
        rows,
        tests,
    })
}

pub fn render_scores_csv(scores: &[FairnessScore<f64>]) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record([
        "instance_id",
        "scenario",
        "spd_expected",
        "spd_observed",
        "spd_second_order",
    ])
    .expect("in-memory write");
    for s in scores {
        wtr.write_record([
            s.instance_id.clone(),
            s.scenario.clone(),
            s.spd_expected.to_string(),
            s.spd_observed.to_string(),
            s.spd_second_order.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("flush")).expect("utf-8")
}

pub fn render_tests_csv(tests: &[ScopedTest]) -> String {
    let mut out = String::from("scope,n,mean_diff,t_stat,df,p_value,significant\n");
    for t in tests {
        match &t.result {
            Some(r) => out.push_str(&format!(
                "{},{},{:?},{:?},{},{:?},{}\n",
                t.scope,
                r.n,
                r.mean_diff,
                r.t_statistic,
                r.degrees_of_freedom,
                r.p_value,
                if r.significant_at_05 { "*" } else { "" }
            )),
            None => out.push_str(&format!("{},,,,,,\n", t.scope)),
        }
    }
    out
}

/// Score a run directory and write `scores.csv`, `ttests.csv` and the reports.
pub fn score_and_write(dir: &Path, config: &RunConfig) -> Result<ScoreOutcome, PipelineError> {
    let outcome = score_dir(dir, config)?;
    let write = |name: &str, text: String| {
        let path = artifact(dir, name);
        fs::write(&path, text).map_err(io_err(&path))
    };
    write(SCORES_FILE, render_scores_csv(&outcome.scores))?;
    write(TTESTS_FILE, render_tests_csv(&outcome.tests))?;
    write(REPORT_CSV_FILE, render_csv(&outcome.rows)?)?;
    write(REPORT_MD_FILE, render_markdown(&outcome.rows)?)?;
    Ok(outcome)
}

/// Lines of a stage file, for callers that only need counts.
pub fn count_lines(path: &Path) -> Result<usize, PipelineError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(BufReader::new(file).lines().count())
}
