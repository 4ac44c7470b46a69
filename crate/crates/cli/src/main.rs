use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fairsum_core::adapters::transport::serve_lines;
use fairsum_core::adapters::{AdapterEndpoint, AdapterKind};
use fairsum_core::corpus::{load_corpus, CorpusFormat};
use fairsum_core::pipeline::{
    self, build_instances, prepare_corpus, score_and_write, Adapters, Mix, OracleSettings, OracleTransport, RunConfig,
    SplitterConfig,
};
use fairsum_core::report::{parse_csv, render_markdown};
use fairsum_core::scenario::write_instances;
use fairsum_core::simkit::{BiasDirection, MockSplitter, OracleBias, OracleClassifier, OracleSummarizer};
use fairsum_core::MinorityWeight;

/// Audit opinion summarizers for political-stance bias.
#[derive(Parser)]
#[command(name = "fairsum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus and print its stance counts.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
        /// Print the counts as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Sample scenario instances and write scenarios.jsonl.
    Scenarios {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Summarize, segment and classify every instance.
    Run(RunArgs),
    /// Score a run directory and write scores.csv and the reports.
    Score {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        confidence_threshold: Option<f64>,
        /// JSONL file of {"instance_id", "references": [...]} for ROUGE.
        #[arg(long)]
        references: Option<PathBuf>,
    },
    /// Merge report.csv files into one Markdown report on stdout.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Run the full pipeline against the synthetic oracles.
    Simulate(SimulateArgs),
    /// Serve a synthetic oracle over stdin/stdout.
    Oracle {
        #[arg(value_enum)]
        role: OracleRole,
        #[command(flatten)]
        bias: BiasArgs,
        /// Splitter only: answer every request with an error.
        #[arg(long)]
        fail: bool,
    },
}

#[derive(Args, Clone)]
struct Sampling {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 20)]
    size: usize,
    /// Custom mix as NAME=P_LEFT; repeatable. Replaces the builtin three.
    #[arg(long = "mix", value_parser = parse_mix)]
    mixes: Vec<Mix>,
}

#[derive(Args)]
struct RunArgs {
    /// Re-run from a saved config.json; other flags are ignored.
    #[arg(long, conflicts_with_all = ["corpus", "out"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    corpus: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 20)]
    size: usize,
    #[arg(long = "mix", value_parser = parse_mix)]
    mixes: Vec<Mix>,
    /// `cmd:<shell command>` or `http:<base url>`.
    #[arg(long, required_unless_present = "config")]
    summarizer: Option<String>,
    #[arg(long, required_unless_present = "config")]
    classifier: Option<String>,
    /// `builtin`, `cmd:<shell command>` or `http:<base url>`.
    #[arg(long, default_value = "builtin")]
    splitter: String,
    #[arg(long, default_value_t = 0.5)]
    minority_weight: f64,
    #[arg(long, default_value_t = 0.0)]
    confidence_threshold: f64,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[arg(long, default_value_t = 1)]
    max_retries: u32,
    /// Ask for summaries of 90-110% of this many words.
    #[arg(long)]
    target_words: Option<u32>,
    #[arg(long)]
    abbreviations: Option<PathBuf>,
    #[arg(long, default_value = "model")]
    model: String,
    #[arg(long, default_value = "default")]
    method: String,
    /// Keep earlier stage records and skip completed instances.
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Clone)]
struct BiasArgs {
    #[arg(long, default_value = "none")]
    bias: BiasDirection,
    #[arg(long, default_value_t = 0.0)]
    strength: f64,
    /// Sentences per oracle summary.
    #[arg(long, default_value_t = 20)]
    sentences: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportChoice {
    Inproc,
    Subprocess,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleRole {
    Summarizer,
    Classifier,
    Splitter,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    bias: BiasArgs,
    /// Tag and use this corpus instead of a synthetic one.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long, value_enum, default_value = "inproc")]
    transport: TransportChoice,
    /// Documents per side in the synthetic corpus.
    #[arg(long, default_value_t = 1000)]
    pool: usize,
    #[arg(long, default_value_t = 0.5)]
    minority_weight: f64,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long)]
    resume: bool,
}

fn parse_mix(s: &str) -> Result<Mix, String> {
    let (name, p) = s.split_once('=').ok_or("expected NAME=P_LEFT")?;
    let p_left = p.parse::<f64>().map_err(|e| e.to_string())?;
    if name.is_empty() {
        return Err("empty mix name".into());
    }
    Ok(Mix {
        name: name.to_string(),
        p_left,
    })
}

/// Failures that map to the partial-failure exit code.
struct Partial(usize);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Partial(n))) => {
            eprintln!("{n} instance(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<Option<Partial>> {
    match command {
        Command::Validate { corpus, json } => validate(&corpus, json).map(|_| None),
        Command::Scenarios { corpus, sampling } => scenarios(&corpus, sampling).map(|_| None),
        Command::Run(args) => run(args),
        Command::Score {
            out,
            confidence_threshold,
            references,
        } => score(&out, confidence_threshold, references).map(|_| None),
        Command::Report { inputs } => report(&inputs).map(|_| None),
        Command::Simulate(args) => simulate(args),
        Command::Oracle { role, bias, fail } => oracle(role, bias, fail).map(|_| None),
    }
}

fn validate(path: &Path, json: bool) -> anyhow::Result<()> {
    let corpus = load_corpus(path, CorpusFormat::from_path(path))?;
    let c = corpus.counts();
    if json {
        let value = serde_json::json!({
            "documents": corpus.len(),
            "left": c.left,
            "right": c.right,
            "neutral": c.neutral,
        });
        println!("{value}");
    } else {
        println!("documents: {}", corpus.len());
        println!("left: {}", c.left);
        println!("right: {}", c.right);
        println!("neutral: {}", c.neutral);
    }
    Ok(())
}

fn scenarios(corpus_path: &Path, sampling: Sampling) -> anyhow::Result<()> {
    let corpus = load_corpus(corpus_path, CorpusFormat::from_path(corpus_path))?;
    let mut config = RunConfig::new(&sampling.out);
    config.corpus = Some(corpus_path.to_path_buf());
    apply_sampling(&mut config, &sampling);
    let instances = build_instances(&config, &corpus)?;
    fs::create_dir_all(&sampling.out).with_context(|| format!("creating {}", sampling.out.display()))?;
    let path = pipeline::artifact(&sampling.out, pipeline::SCENARIOS_FILE);
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_instances(io::BufWriter::new(file), &instances)?;
    println!("{} instances written to {}", instances.len(), path.display());
    Ok(())
}

fn apply_sampling(config: &mut RunConfig, sampling: &Sampling) {
    config.out = sampling.out.clone();
    config.seed = sampling.seed;
    config.instances = sampling.instances;
    config.size = sampling.size;
    config.mixes = sampling.mixes.clone();
}

fn endpoint(kind: AdapterKind, spec: &str, timeout: Duration, max_retries: u32) -> anyhow::Result<AdapterEndpoint> {
    let mut endpoint = AdapterEndpoint::parse(kind, spec).with_context(|| format!("--{kind}"))?;
    endpoint.timeout = timeout;
    endpoint.max_retries = max_retries;
    Ok(endpoint)
}

fn run_config(args: RunArgs) -> anyhow::Result<(RunConfig, bool)> {
    if let Some(path) = &args.config {
        return Ok((RunConfig::load(path)?, args.resume));
    }
    let out = args.out.expect("required by clap");
    let mut config = RunConfig::new(&out);
    config.corpus = args.corpus;
    apply_sampling(
        &mut config,
        &Sampling {
            out,
            seed: args.seed,
            instances: args.instances,
            size: args.size,
            mixes: args.mixes,
        },
    );
    let timeout = Duration::try_from_secs_f64(args.timeout).context("--timeout")?;
    let summarizer = args.summarizer.expect("required by clap");
    let classifier = args.classifier.expect("required by clap");
    config.summarizer = Some(endpoint(
        AdapterKind::Summarizer,
        &summarizer,
        timeout,
        args.max_retries,
    )?);
    config.classifier = Some(endpoint(
        AdapterKind::Classifier,
        &classifier,
        timeout,
        args.max_retries,
    )?);
    config.splitter = if args.splitter == "builtin" {
        SplitterConfig::Builtin
    } else {
        SplitterConfig::Endpoint {
            endpoint: endpoint(AdapterKind::Splitter, &args.splitter, timeout, args.max_retries)?,
        }
    };
    config.minority_weight = MinorityWeight::new(args.minority_weight)?;
    config.confidence_threshold = args.confidence_threshold;
    config.concurrency = args.concurrency;
    config.target_words = args.target_words.map(fairsum_core::adapters::WordRange::around);
    config.abbreviations = args.abbreviations;
    config.model = args.model;
    config.method = args.method;
    Ok((config, args.resume))
}

fn execute(config: &RunConfig, resume: bool) -> anyhow::Result<Option<Partial>> {
    config.validate()?;
    let corpus = prepare_corpus(config)?;
    let adapters = Adapters::from_config(config)?;
    let outcome = pipeline::run(config, &corpus, &adapters, resume)?;
    log::info!("{outcome:?}");
    println!(
        "{} instances: {} completed ({} from earlier runs), {} failed",
        outcome.total, outcome.completed, outcome.skipped, outcome.failed
    );
    Ok((outcome.failed > 0).then_some(Partial(outcome.failed)))
}

fn run(args: RunArgs) -> anyhow::Result<Option<Partial>> {
    let (config, resume) = run_config(args)?;
    execute(&config, resume)
}

fn score(out: &Path, threshold: Option<f64>, references: Option<PathBuf>) -> anyhow::Result<()> {
    let config_path = pipeline::artifact(out, pipeline::CONFIG_FILE);
    if !config_path.exists() {
        bail!(
            "{} is not a run directory: missing {}",
            out.display(),
            config_path.display()
        );
    }
    let mut config = RunConfig::load(&config_path)?;
    if let Some(t) = threshold {
        config.confidence_threshold = t;
    }
    if references.is_some() {
        config.references = references;
    }
    config.validate()?;
    let outcome = score_and_write(out, &config)?;
    println!(
        "{} instances scored, {} excluded; wrote {}",
        outcome.scores.len(),
        outcome.excluded.len(),
        pipeline::artifact(out, pipeline::REPORT_MD_FILE).display()
    );
    Ok(())
}

fn report(inputs: &[PathBuf]) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        rows.extend(parse_csv(&text).with_context(|| path.display().to_string())?);
    }
    print!("{}", render_markdown(&rows)?);
    Ok(())
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

fn simulate(args: SimulateArgs) -> anyhow::Result<Option<Partial>> {
    let bias = OracleBias::new(args.bias.bias, args.bias.strength);
    let mut config = RunConfig::new(&args.sampling.out);
    config.corpus = args.corpus;
    apply_sampling(&mut config, &args.sampling);
    config.minority_weight = MinorityWeight::new(args.minority_weight)?;
    config.concurrency = args.concurrency;
    config.model = "oracle".into();
    config.method = format!("{}-{}", args.bias.bias, args.bias.strength);
    let transport = match args.transport {
        TransportChoice::Inproc => OracleTransport::InProcess,
        TransportChoice::Subprocess => {
            let exe = std::env::current_exe().context("locating the fairsum executable")?;
            let exe = shell_quote(&exe.to_string_lossy());
            let summarizer = format!(
                "cmd:{exe} oracle summarizer --bias {} --strength {} --sentences {}",
                args.bias.bias, args.bias.strength, args.bias.sentences
            );
            config.summarizer = Some(AdapterEndpoint::parse(AdapterKind::Summarizer, &summarizer)?);
            config.classifier = Some(AdapterEndpoint::parse(
                AdapterKind::Classifier,
                &format!("cmd:{exe} oracle classifier"),
            )?);
            OracleTransport::Subprocess
        }
    };
    config.oracle = Some(OracleSettings {
        bias,
        sentences: args.bias.sentences,
        transport,
        synthetic_pool: args.pool,
    });
    let partial = execute(&config, args.resume)?;
    let outcome = score_and_write(&config.out, &config)?;
    log::info!("{} scored, {} excluded", outcome.scores.len(), outcome.excluded.len());
    print!("{}", render_markdown(&outcome.rows)?);
    Ok(partial)
}

fn oracle(role: OracleRole, bias: BiasArgs, fail: bool) -> anyhow::Result<()> {
    let stdin = BufReader::new(io::stdin().lock());
    let stdout = io::stdout().lock();
    match role {
        OracleRole::Summarizer => serve_lines(
            &OracleSummarizer::new(OracleBias::new(bias.bias, bias.strength), bias.sentences),
            stdin,
            stdout,
        )?,
        OracleRole::Classifier => serve_lines(&OracleClassifier, stdin, stdout)?,
        OracleRole::Splitter => serve_lines(&MockSplitter { fail }, stdin, stdout)?,
    }
    Ok(())
}
