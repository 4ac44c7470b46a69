mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use fairsum_core::adapters::protocol::{Request, Response, SummarizeResponse};
use fairsum_core::adapters::transport::Handler;
use fairsum_core::adapters::{Adapter, AdapterKind, Splitter};
use fairsum_core::corpus::{load_corpus, CorpusFormat};
use fairsum_core::pipeline::{
    self, prepare_corpus, run, score_and_write, Adapters, OracleSettings, OracleTransport, PipelineError, RunConfig,
};
use fairsum_core::simkit::{BiasDirection, OracleBias, OracleClassifier, OracleSummarizer};
use fairsum_core::Corpus;

fn oracle_config(out: &Path, direction: BiasDirection, strength: f64) -> RunConfig {
    let mut config = RunConfig::new(out);
    config.oracle = Some(OracleSettings {
        bias: OracleBias::new(direction, strength),
        sentences: 20,
        transport: OracleTransport::InProcess,
        synthetic_pool: 500,
    });
    config
}

fn means(outcome: &pipeline::ScoreOutcome) -> BTreeMap<String, f64> {
    outcome.rows.iter().map(|r| (r.scenario.clone(), r.mean_spd2)).collect()
}

#[test]
fn oracle_run_on_fixture_scores_every_instance() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = oracle_config(&dir.path().join("run"), BiasDirection::Left, 0.4);
    config.corpus = Some(common::write_fixture_jsonl(dir.path()));
    let corpus = prepare_corpus(&config).unwrap();
    let adapters = Adapters::from_config(&config).unwrap();
    let outcome = run(&config, &corpus, &adapters, false).unwrap();
    assert_eq!((outcome.total, outcome.completed, outcome.failed), (300, 300, 0));

    let scored = score_and_write(&config.out, &config).unwrap();
    assert_eq!(scored.scores.len(), 300);
    assert!(scored.excluded.is_empty());
    let m = means(&scored);
    assert!((m["equal"] + 0.2).abs() < 1e-12);
    assert!((m["skew_left"] + 0.1).abs() < 1e-12);
    assert!((m["skew_right"] + 0.3).abs() < 1e-12);
    for name in [
        "config.json",
        "scenarios.jsonl",
        "summaries.jsonl",
        "sentences.jsonl",
        "predictions.jsonl",
        "scores.csv",
        "ttests.csv",
        "report.csv",
        "report.md",
    ] {
        assert!(config.out.join(name).exists(), "{name}");
    }
    assert_eq!(
        pipeline::count_lines(&config.out.join("sentences.jsonl")).unwrap(),
        300 * 20
    );
}

#[test]
fn config_snapshot_reruns_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    let config = oracle_config(&dir.path().join("a"), BiasDirection::Right, 0.2);
    let corpus = prepare_corpus(&config).unwrap();
    run(&config, &corpus, &Adapters::from_config(&config).unwrap(), false).unwrap();
    score_and_write(&config.out, &config).unwrap();

    let mut reloaded = RunConfig::load(&config.out.join("config.json")).unwrap();
    assert_eq!(reloaded, config);
    reloaded.out = dir.path().join("b");
    let corpus = prepare_corpus(&reloaded).unwrap();
    run(&reloaded, &corpus, &Adapters::from_config(&reloaded).unwrap(), false).unwrap();
    score_and_write(&reloaded.out, &reloaded).unwrap();
    assert_eq!(
        fs::read(config.out.join("scores.csv")).unwrap(),
        fs::read(reloaded.out.join("scores.csv")).unwrap()
    );
}

#[test]
fn concurrency_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("one", 1), ("many", 8)] {
        let mut config = oracle_config(&dir.path().join(name), BiasDirection::Left, 1.0);
        config.concurrency = threads;
        let corpus = prepare_corpus(&config).unwrap();
        run(&config, &corpus, &Adapters::from_config(&config).unwrap(), false).unwrap();
        score_and_write(&config.out, &config).unwrap();
        outputs.push(
            ["scores.csv", "report.csv", "report.md", "ttests.csv", "scenarios.jsonl"]
                .map(|f| fs::read(config.out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

/// Oracle summarizer that counts calls and fails for chosen instances.
struct Flaky {
    inner: OracleSummarizer,
    calls: Arc<AtomicUsize>,
    fail_every: usize,
}

impl Handler for Flaky {
    fn handle(&self, request: Request) -> Response {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Request::Summarize(r) = &request {
            let index: usize = r.instance_id.rsplit('-').next().unwrap().parse().unwrap();
            if self.fail_every > 0 && index.is_multiple_of(self.fail_every) {
                return Response::error("backend unavailable");
            }
        }
        self.inner.handle(request)
    }
}

fn flaky_adapters(fail_every: usize, calls: &Arc<AtomicUsize>) -> Adapters {
    Adapters {
        summarizer: Adapter::in_process(
            AdapterKind::Summarizer,
            Flaky {
                inner: OracleSummarizer::new(OracleBias::new(BiasDirection::Left, 0.4), 20),
                calls: Arc::clone(calls),
                fail_every,
            },
        ),
        classifier: Adapter::in_process(AdapterKind::Classifier, OracleClassifier),
        splitter: Splitter::default(),
    }
}

fn run_flaky(config: &RunConfig, corpus: &Corpus, fail_every: usize, resume: bool) -> (pipeline::RunOutcome, usize) {
    let calls = Arc::new(AtomicUsize::new(0));
    let outcome = run(config, corpus, &flaky_adapters(fail_every, &calls), resume).unwrap();
    (outcome, calls.load(Ordering::SeqCst))
}

#[test]
fn resume_skips_completed_instances_and_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = oracle_config(&dir.path().join("x"), BiasDirection::Left, 0.4);
    let corpus = prepare_corpus(&base).unwrap();

    let mut clean = base.clone();
    clean.out = dir.path().join("clean");
    let (outcome, calls) = run_flaky(&clean, &corpus, 0, false);
    assert_eq!((outcome.completed, calls), (300, 300));
    score_and_write(&clean.out, &clean).unwrap();

    let mut broken = base.clone();
    broken.out = dir.path().join("broken");
    let (outcome, _) = run_flaky(&broken, &corpus, 4, false);
    assert_eq!((outcome.completed, outcome.failed), (225, 75));

    // Failed instances are reported as excluded by an intermediate score.
    let partial = score_and_write(&broken.out, &broken).unwrap();
    assert_eq!((partial.scores.len(), partial.excluded.len()), (225, 75));

    // Tear the last prediction record as a killed process would.
    let predictions = broken.out.join("predictions.jsonl");
    let bytes = fs::read(&predictions).unwrap();
    let cut = bytes.len() - 40;
    fs::write(&predictions, &bytes[..cut]).unwrap();
    let summaries_before = fs::read(broken.out.join("summaries.jsonl")).unwrap();

    let (outcome, calls) = run_flaky(&broken, &corpus, 0, true);
    assert_eq!(outcome.failed, 0);
    assert_eq!(outcome.completed, 300);
    assert_eq!(outcome.skipped, 224);
    // Only the 75 failed summaries are requested again; the torn instance
    // reuses its stored summary.
    assert_eq!(calls, 75);
    let summaries_after = fs::read(broken.out.join("summaries.jsonl")).unwrap();
    assert_eq!(&summaries_after[..summaries_before.len()], &summaries_before[..]);

    score_and_write(&broken.out, &broken).unwrap();
    for file in ["scores.csv", "report.csv", "report.md", "ttests.csv"] {
        assert_eq!(
            fs::read(clean.out.join(file)).unwrap(),
            fs::read(broken.out.join(file)).unwrap(),
            "{file}"
        );
    }

    // A second resume has nothing left to do.
    let (outcome, calls) = run_flaky(&broken, &corpus, 0, true);
    assert_eq!((outcome.skipped, calls), (300, 0));
}

#[test]
fn resume_rejects_a_different_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = oracle_config(dir.path(), BiasDirection::Left, 0.4);
    config.instances = 5;
    let corpus = prepare_corpus(&config).unwrap();
    run_flaky(&config, &corpus, 0, false);
    config.seed = 99;
    let err = run(
        &config,
        &corpus,
        &flaky_adapters(0, &Arc::new(AtomicUsize::new(0))),
        true,
    )
    .unwrap_err();
    assert!(matches!(err, PipelineError::ResumeMismatch(_)), "{err}");
}

/// Summarizer emitting two left sentences and one minority right sentence.
struct MinoritySummary;

impl Handler for MinoritySummary {
    fn handle(&self, request: Request) -> Response {
        let Request::Summarize(r) = request else {
            return Response::error("kind");
        };
        Response::Summarize(SummarizeResponse {
            summary: "LEFT: Taxes should rise. LEFT: Schools need money. RIGHT: The minority wants cuts.".into(),
            instance_id: r.instance_id,
        })
    }
}

#[test]
fn minority_sentences_count_half() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = oracle_config(dir.path(), BiasDirection::None, 0.0);
    config.instances = 3;
    let corpus = prepare_corpus(&config).unwrap();
    let adapters = Adapters {
        summarizer: Adapter::in_process(AdapterKind::Summarizer, MinoritySummary),
        classifier: Adapter::in_process(AdapterKind::Classifier, OracleClassifier),
        splitter: Splitter::default(),
    };
    run(&config, &corpus, &adapters, false).unwrap();
    let scored = score_and_write(&config.out, &config).unwrap();
    for s in &scored.scores {
        // p_left = 2 / 2.5 = 0.8, so the observed SPD is 0.6.
        assert!((s.spd_observed - 0.6).abs() < 1e-12, "{s:?}");
    }
}

#[test]
fn scoring_needs_run_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::new(dir.path());
    assert!(matches!(
        score_and_write(dir.path(), &config).unwrap_err(),
        PipelineError::MissingArtifact(_)
    ));
}

#[test]
fn confidence_threshold_can_exclude_instances() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = oracle_config(dir.path(), BiasDirection::Left, 0.4);
    config.instances = 4;
    let corpus = prepare_corpus(&config).unwrap();
    run(&config, &corpus, &Adapters::from_config(&config).unwrap(), false).unwrap();
    // Oracle confidences are 1.0, so a threshold of 1 keeps everything.
    config.confidence_threshold = 1.0;
    assert_eq!(score_and_write(&config.out, &config).unwrap().scores.len(), 12);
}

#[test]
fn prepare_corpus_without_oracle_uses_the_file_as_is() {
    let dir = tempfile::tempdir().unwrap();
    let path = common::write_fixture_jsonl(dir.path());
    let mut config = RunConfig::new(dir.path().join("run"));
    config.corpus = Some(path.clone());
    assert_eq!(
        prepare_corpus(&config).unwrap(),
        load_corpus(&path, CorpusFormat::Jsonl).unwrap()
    );
    config.corpus = None;
    assert!(matches!(prepare_corpus(&config).unwrap_err(), PipelineError::Config(_)));
}
