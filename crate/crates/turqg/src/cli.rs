//! The `turqg` command line.

use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use turqg_core::corpus::{corpus_stats, validate_and_repair_spans, Corpus};
use turqg_core::format::build_multitask_dataset;
use turqg_core::metrics::{corpus_qa_scores, qg_scores, MetricError, MetricReport};
use turqg_core::text::slice_chars;
use turqg_core::tokenizer::{split_sentences, RuleSet};

use crate::client::{BackendClient, HttpBackend, RetryPolicy};
use crate::config::{ConfigError, FileConfig, RunConfig};
use crate::fetch::{Fetcher, Manifest};
use crate::generate::{generate_all, ContextRecord};
use crate::jsonl::{read_jsonl_file, write_jsonl, write_jsonl_file};
use crate::mock::{FixtureTable, MockOptions, MockServer};
use crate::predictions::{read_qa_predictions, read_qg_aligned, read_qg_jsonl, PredictionError};
use crate::report::Table;
use crate::squad::parse_squad_json;

const PRECEDENCE: &str = "Settings resolve as built-in defaults < --config file < TURQG_BACKEND (endpoint only) < flags.\n\
Exit codes: 0 success, 1 runtime failure, 2 usage error.";

#[derive(Debug, Parser)]
#[command(name = "turqg", version, about = "Turkish QA/QG datasets, metrics and two-stage question generation", after_help = PRECEDENCE)]
pub struct Cli {
    /// TOML config file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// off, error, warn, info, debug or trace
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log_level: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a multi-task JSONL training file from a dataset
    Prepare(PrepareArgs),
    /// Print corpus statistics as a JSON line
    Stats(StatsArgs),
    /// Split standard input into sentences, one JSON span per line
    Split(SplitArgs),
    /// Score predictions
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Generate question/answer pairs through a backend
    Generate(GenerateArgs),
    /// Serve the mock generation backend
    ServeMock(ServeMockArgs),
    /// Render metric reports as a table
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// tquad1, tquad2 or xquad.tr
    #[arg(long)]
    pub dataset: Option<String>,
    /// train or val
    #[arg(long)]
    pub split: Option<String>,
    /// Read a local SQuAD JSON file instead of fetching
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Dataset manifest replacing the built-in one
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated subset of qa, qg, ae
    #[arg(long)]
    pub tasks: Option<String>,
    /// prepend, highlight or both
    #[arg(long)]
    pub qg_format: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sentence rule file replacing the built-in rules
    #[arg(long, value_name = "PATH")]
    pub rules: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Write the span repair log here as JSONL
    #[arg(long, value_name = "PATH")]
    pub repair_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Count after span repair instead of as parsed
    #[arg(long)]
    pub repaired: bool,
    /// Write the span repair log here as JSONL
    #[arg(long, value_name = "PATH")]
    pub repair_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, value_name = "PATH")]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EvaluateCommand {
    /// EM and F1 against a gold dataset
    Qa(EvalQaArgs),
    /// BLEU-1, BLEU-2 and ROUGE-L
    Qg(EvalQgArgs),
}

#[derive(Debug, Args)]
pub struct EvalQaArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON object mapping question id to predicted answer
    #[arg(long, value_name = "PATH")]
    pub predictions: PathBuf,
    /// Write the MetricReport JSON here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalQgArgs {
    /// One candidate question per line
    #[arg(long, value_name = "PATH", requires = "references", conflicts_with = "predictions")]
    pub candidates: Option<PathBuf>,
    /// One reference question per line
    #[arg(long, value_name = "PATH", requires = "candidates")]
    pub references: Option<PathBuf>,
    /// JSONL with id, candidate and reference
    #[arg(long, value_name = "PATH", required_unless_present = "candidates")]
    pub predictions: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSONL lines {"key","context","answers"?}
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Backend base URL
    #[arg(long, value_name = "URL")]
    pub backend: Option<String>,
    #[arg(long)]
    pub qg_format: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Maximum concurrent backend requests
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Inputs per backend request
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
    #[arg(long, value_name = "PATH")]
    pub rules: Option<PathBuf>,
    /// Retries per request on transient failures
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct ServeMockArgs {
    /// JSON list of {"match":{"kind","pattern"},"output"}
    #[arg(long, value_name = "PATH")]
    pub fixtures: Option<PathBuf>,
    #[arg(long, default_value_t = 8331)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value = "mock")]
    pub model_id: String,
    /// Answer the first N generate requests with --fail-status
    #[arg(long, default_value_t = 0)]
    pub fail_first: usize,
    #[arg(long, default_value_t = 503)]
    pub fail_status: u16,
    /// Drop the last output of every response
    #[arg(long)]
    pub truncate: bool,
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// MetricReport JSON files; each becomes a row named after its file stem
    #[arg(value_name = "REPORT")]
    pub reports: Vec<PathBuf>,
    /// Also write the table as CSV
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::Runtime(e.into()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn resolve(cli_config: Option<&Path>, log_level: Option<String>, flags: FileConfig) -> CliResult<RunConfig> {
    let file = match cli_config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = FileConfig { log_level, ..flags };
    Ok(RunConfig::resolve(file, flags)?)
}

fn init_logging(level: log::LevelFilter) {
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn data_flags(d: &DataArgs) -> FileConfig {
    FileConfig {
        dataset: d.dataset.clone(),
        split: d.split.clone(),
        cache_dir: d.cache_dir.clone(),
        manifest: d.manifest.clone(),
        ..FileConfig::default()
    }
}

fn load_rules(path: Option<&Path>) -> CliResult<RuleSet> {
    match path {
        None => Ok(RuleSet::builtin()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading rules {}", p.display()))?;
            RuleSet::parse(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
    }
}

fn load_corpus(input: Option<&Path>, cfg: &RunConfig) -> CliResult<Corpus> {
    let (path, name) = match input {
        Some(p) => {
            let name = cfg
                .dataset
                .clone()
                .or_else(|| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .unwrap_or_default();
            (p.to_path_buf(), name)
        }
        None => {
            let name = cfg.dataset.clone().ok_or_else(|| usage("--dataset or --input is required"))?;
            let manifest = match &cfg.manifest {
                Some(m) => Manifest::load(m).map_err(|e| usage(e.to_string()))?,
                None => Manifest::builtin(),
            };
            let path = Fetcher::default()
                .fetch(&manifest, &name, cfg.split, &cfg.cache_dir)
                .map_err(|e| if e.is_usage() { usage(e.to_string()) } else { CliError::Runtime(e.into()) })?;
            (path, name)
        }
    };
    let raw = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    parse_squad_json(&raw, &name, cfg.split)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(CliError::Runtime)
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes()).context("writing standard output")?,
    }
    Ok(())
}

fn cmd_prepare(args: PrepareArgs, cfg: &RunConfig) -> CliResult {
    let rules = load_rules(cfg.rules.as_deref())?;
    let corpus = load_corpus(args.data.input.as_deref(), cfg)?;
    let (corpus, log) = validate_and_repair_spans(corpus);
    if !log.is_empty() {
        log::info!(
            "span repair: {} answers repaired, {} records dropped",
            log.repaired_answers(),
            log.dropped_records()
        );
    }
    if let Some(p) = &args.repair_log {
        write_jsonl_file(p, &log.entries).map_err(anyhow::Error::from)?;
    }
    let samples = build_multitask_dataset(&corpus, &cfg.tasks, cfg.qg_format, cfg.seed, &rules)
        .map_err(|e| anyhow!("formatting failed: {e}"))?;
    let n = write_jsonl_file(&args.out, &samples).map_err(anyhow::Error::from)?;
    log::info!("wrote {n} samples to {}", args.out.display());
    Ok(())
}

fn cmd_stats(args: StatsArgs, cfg: &RunConfig) -> CliResult {
    let corpus = load_corpus(args.data.input.as_deref(), cfg)?;
    let (repaired, log) = validate_and_repair_spans(corpus.clone());
    if let Some(p) = &args.repair_log {
        write_jsonl_file(p, &log.entries).map_err(anyhow::Error::from)?;
    }
    let stats = corpus_stats(if args.repaired { &repaired } else { &corpus });
    let mut line = serde_json::to_string(&stats).context("serializing stats")?;
    line.push('\n');
    write_output(None, &line)
}

#[derive(serde::Serialize)]
struct SpanRecord<'a> {
    start: usize,
    end: usize,
    text: &'a str,
}

fn cmd_split(args: SplitArgs, cfg: &RunConfig) -> CliResult {
    let rules = load_rules(args.rules.as_deref().or(cfg.rules.as_deref()))?;
    let mut text = String::new();
    io::stdin().read_to_string(&mut text).context("reading standard input")?;
    let records = split_sentences(&text, &rules).into_iter().map(|s| SpanRecord {
        start: s.start,
        end: s.end,
        text: slice_chars(&text, s.start, s.end).expect("span inside text"),
    });
    write_jsonl(BufWriter::new(io::stdout().lock()), records).context("writing standard output")?;
    Ok(())
}

fn metric_failure(e: MetricError) -> CliError {
    match e {
        MetricError::LengthMismatch { .. } | MetricError::MissingPredictions(_) | MetricError::Empty => {
            usage(e.to_string())
        }
        _ => CliError::Runtime(e.into()),
    }
}

fn prediction_failure(e: PredictionError) -> CliError {
    match e {
        PredictionError::Misaligned { .. } => usage(e.to_string()),
        _ => CliError::Runtime(e.into()),
    }
}

fn emit_report(report: MetricReport, out: Option<&Path>) -> CliResult {
    let mut json = serde_json::to_string(&report).context("serializing report")?;
    json.push('\n');
    write_output(out, &json)?;
    let table = Table::from_reports(&[("result".into(), report)]).expect("one report");
    eprint!("{}", table.to_text());
    Ok(())
}

fn cmd_evaluate(cmd: EvaluateCommand, cfg: &RunConfig) -> CliResult {
    match cmd {
        EvaluateCommand::Qa(args) => {
            let gold = load_corpus(args.data.input.as_deref(), cfg)?;
            let predictions = read_qa_predictions(&args.predictions).map_err(prediction_failure)?;
            let scores = corpus_qa_scores(&predictions, &gold).map_err(metric_failure)?;
            emit_report(MetricReport::Qa(scores), args.out.as_deref())
        }
        EvaluateCommand::Qg(args) => {
            let (cands, refs) = match (&args.candidates, &args.references, &args.predictions) {
                (Some(c), Some(r), None) => read_qg_aligned(c, r),
                (None, None, Some(p)) => read_qg_jsonl(p),
                _ => return Err(usage("give --candidates with --references, or --predictions")),
            }
            .map_err(prediction_failure)?;
            let scores = qg_scores(&cands, &refs).map_err(metric_failure)?;
            emit_report(MetricReport::Qg(scores), args.out.as_deref())
        }
    }
}

fn cmd_generate(args: GenerateArgs, cfg: &RunConfig) -> CliResult {
    let rules = load_rules(cfg.rules.as_deref())?;
    let records: Vec<ContextRecord> = read_jsonl_file(&args.input).map_err(anyhow::Error::from)?;
    let client = BackendClient::with_timeout(&cfg.backend, Duration::from_secs(args.timeout_secs)).with_policy(
        RetryPolicy {
            max_retries: args.retries,
            ..RetryPolicy::default()
        },
    );
    let backend = HttpBackend::new(client)
        .batch_size(cfg.batch_size)
        .max_in_flight(cfg.jobs)
        .max_new_tokens(cfg.max_new_tokens);
    let run = generate_all(&records, cfg.qg_format, &backend, &rules);
    let n = write_jsonl_file(&args.out, &run.pairs).map_err(anyhow::Error::from)?;
    log::info!("wrote {n} pairs to {}", args.out.display());
    if run.is_partial() {
        for f in &run.failures {
            match &f.answer {
                Some(a) => eprintln!("failed: {} answer {a:?}: {}", f.context_key, f.error),
                None => eprintln!("failed: {}: {}", f.context_key, f.error),
            }
        }
        return Err(CliError::Runtime(anyhow!(
            "{} item(s) failed; {n} pairs written",
            run.failures.len()
        )));
    }
    Ok(())
}

fn cmd_serve_mock(args: ServeMockArgs) -> CliResult {
    let table = match &args.fixtures {
        Some(p) => FixtureTable::load(p).map_err(|e| usage(e.to_string()))?,
        None => FixtureTable::default(),
    };
    let options = MockOptions {
        model_id: args.model_id,
        fail_first: args.fail_first,
        fail_status: args.fail_status,
        truncate: args.truncate,
        delay: Duration::from_millis(args.delay_ms),
    };
    let addr = format!("{}:{}", args.host, args.port);
    let server = MockServer::start(&addr, table, options).map_err(anyhow::Error::from)?;
    eprintln!("mock backend listening on {}", server.url());
    server.wait().context("mock server stopped")?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CliResult {
    if args.reports.is_empty() {
        return Err(usage("at least one report is required"));
    }
    let mut rows = Vec::new();
    for p in &args.reports {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let report: MetricReport =
            serde_json::from_str(&text).with_context(|| format!("{} is not a metric report", p.display()))?;
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        rows.push((name, report));
    }
    let table = Table::from_reports(&rows).map_err(|e| usage(e.to_string()))?;
    if let Some(p) = &args.csv {
        fs::write(p, table.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    write_output(None, &table.to_text())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> CliResult {
    let config = cli.config.as_deref();
    let log_level = cli.log_level;
    match cli.command {
        Command::Prepare(args) => {
            let flags = FileConfig {
                tasks: args.tasks.clone(),
                qg_format: args.qg_format.clone(),
                seed: args.seed,
                rules: args.rules.clone(),
                ..data_flags(&args.data)
            };
            let cfg = resolve(config, log_level, flags)?;
            init_logging(cfg.log_level);
            cmd_prepare(args, &cfg)
        }
        Command::Stats(args) => {
            let cfg = resolve(config, log_level, data_flags(&args.data))?;
            init_logging(cfg.log_level);
            cmd_stats(args, &cfg)
        }
        Command::Split(args) => {
            let cfg = resolve(config, log_level, FileConfig::default())?;
            init_logging(cfg.log_level);
            cmd_split(args, &cfg)
        }
        Command::Evaluate(cmd) => {
            let flags = match &cmd {
                EvaluateCommand::Qa(a) => data_flags(&a.data),
                EvaluateCommand::Qg(_) => FileConfig::default(),
            };
            let cfg = resolve(config, log_level, flags)?;
            init_logging(cfg.log_level);
            cmd_evaluate(cmd, &cfg)
        }
        Command::Generate(args) => {
            let flags = FileConfig {
                backend: args.backend.clone(),
                qg_format: args.qg_format.clone(),
                jobs: args.jobs,
                batch_size: args.batch_size,
                max_new_tokens: args.max_new_tokens,
                rules: args.rules.clone(),
                ..FileConfig::default()
            };
            let cfg = resolve(config, log_level, flags)?;
            init_logging(cfg.log_level);
            cmd_generate(args, &cfg)
        }
        Command::ServeMock(args) => {
            let cfg = resolve(config, log_level, FileConfig::default())?;
            init_logging(cfg.log_level.max(log::LevelFilter::Info));
            cmd_serve_mock(args)
        }
        Command::Report(args) => {
            let cfg = resolve(config, log_level, FileConfig::default())?;
            init_logging(cfg.log_level);
            cmd_report(args)
        }
    }
}
