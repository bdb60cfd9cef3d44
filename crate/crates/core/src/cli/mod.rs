//! Command-line configuration and commands.
//!
//! Exit statuses: 0 success, 2 configuration error, 3 data error, 4 backend
//! failure (including runs where some examples failed).

mod config;

pub use config::{
    RunArgs, RunConfig, DEFAULT_SAMPLE_SIZE, DEFAULT_SEED, ENV_AUTH_HEADER, ENV_AUTH_TOKEN,
    ENV_EMBEDDER_ENDPOINT, ENV_ENDPOINT,
};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::corpus::{load_corpus, Corpus};
use crate::eval::{
    evaluate_traces, load_dataset, sample_demonstrations, subsample, EvalError, EvalReport,
};
use crate::generator::mock::{EchoBackend, ExtractiveBackend, MapBackend};
use crate::generator::{CompletionBackend, RemoteBackend, TemplateSet};
use crate::orchestrator::{ItrgTrace, Pipeline};
use crate::retriever::{
    build_index, read_index, write_index, DenseIndex, Embedder, HashingEmbedder, RemoteEmbedder,
    RetrieverError,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Backend(_) => 4,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "itrg", version, about = "Iterative retrieval-generation for open-domain QA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed a corpus and write the dense index.
    Index(RunArgs),
    /// Run a strategy over a dataset and write traces and a report.
    Run(RunArgs),
    /// Recompute the per-iteration report from a trace file.
    Report {
        traces: PathBuf,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

/// Parses arguments, runs the command, prints results, and returns the exit
/// status.
pub fn run_cli<I, T>(args: I, env: &dyn Fn(&str) -> Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Index(args) => args.resolve(env).and_then(|cfg| cmd_index(&cfg)).map(|s| {
            println!("indexed {} documents with {}", s.count, s.embedder_label);
            println!("wrote {}", s.index_path.display());
            0
        }),
        Command::Run(args) => args.resolve(env).and_then(|cfg| cmd_run(&cfg)).map(|out| {
            print!("{}", out.report.to_table());
            println!("wrote {}", out.out_dir.display());
            if out.report.failed_examples.is_empty() {
                0
            } else {
                eprintln!("{} example(s) failed", out.report.failed_examples.len());
                4
            }
        }),
        Command::Report { traces, json } => cmd_report(&traces).map(|report| {
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print!("{}", report.to_table());
            }
            0
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}

fn make_embedder(cfg: &RunConfig) -> Result<Box<dyn Embedder>, CliError> {
    let desc = cfg.embedder.as_str();
    let dim_of = |s: &str| -> Result<usize, CliError> {
        match s.parse::<usize>() {
            Ok(d) if d > 0 => Ok(d),
            _ => Err(CliError::Config(format!("invalid embedding dimension {s:?}"))),
        }
    };
    if desc == "hash" {
        return Ok(Box::new(HashingEmbedder::default()));
    }
    if let Some(dim) = desc.strip_prefix("hash:") {
        return Ok(Box::new(HashingEmbedder::new(dim_of(dim)?)));
    }
    if let Some(dim) = desc.strip_prefix("remote:") {
        let url = cfg.embedder_endpoint.as_deref().ok_or_else(|| {
            CliError::Config(format!("remote embedder needs embedder_endpoint or {ENV_EMBEDDER_ENDPOINT}"))
        })?;
        let e = RemoteEmbedder::new(cfg.endpoint_config(url), dim_of(dim)?, &cfg.embedder_model)
            .map_err(|e| CliError::Config(e.to_string()))?;
        return Ok(Box::new(e));
    }
    Err(CliError::Config(format!(
        "unknown embedder {desc:?}; expected hash[:<dim>] or remote:<dim>"
    )))
}

fn make_backend(cfg: &RunConfig, targets: Vec<String>) -> Result<Box<dyn CompletionBackend>, CliError> {
    let desc = cfg.backend.as_str();
    let remote = |url: &str| -> Result<Box<dyn CompletionBackend>, CliError> {
        let b = RemoteBackend::new(cfg.endpoint_config(url), cfg.in_flight)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Box::new(b))
    };
    match desc {
        "mock-echo" => Ok(Box::new(EchoBackend)),
        "mock-extractive" => Ok(Box::new(ExtractiveBackend::new(targets))),
        "remote" => {
            let url = cfg.endpoint.as_deref().ok_or_else(|| {
                CliError::Config(format!("remote backend needs endpoint or {ENV_ENDPOINT}"))
            })?;
            remote(url)
        }
        _ if desc.starts_with("http://") || desc.starts_with("https://") => remote(desc),
        _ => match desc.strip_prefix("mock-map:") {
            Some(path) => Ok(Box::new(MapBackend::from_json_file(path).map_err(CliError::Data)?)),
            None => Err(CliError::Config(format!(
                "unknown backend {desc:?}; expected mock-echo, mock-extractive, mock-map:<file>, remote or a URL"
            ))),
        },
    }
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("no {what} given")))
}

fn index_error(e: RetrieverError) -> CliError {
    match e {
        RetrieverError::EmbedDocument { .. } | RetrieverError::EmbedQuery(_) => {
            CliError::Backend(e.to_string())
        }
        other => data(other),
    }
}

#[derive(Debug, Clone)]
pub struct IndexSummary {
    pub count: usize,
    pub embedder_label: String,
    pub index_path: PathBuf,
}

/// Loads the corpus, embeds every document, and writes the index file.
pub fn cmd_index(cfg: &RunConfig) -> Result<IndexSummary, CliError> {
    let corpus_path = require(&cfg.corpus_path, "corpus")?;
    let index_path = cfg.resolved_index_path().expect("corpus path is set");
    let embedder = make_embedder(cfg)?;
    let corpus = load_corpus(corpus_path).map_err(data)?;
    let index = build_index(&corpus, embedder.as_ref()).map_err(index_error)?;
    write_index(&index_path, &index).map_err(data)?;
    Ok(IndexSummary {
        count: index.len(),
        embedder_label: index.embedder_label().to_string(),
        index_path,
    })
}

fn load_or_build_index(cfg: &RunConfig, corpus: &Corpus, embedder: &dyn Embedder) -> Result<DenseIndex, CliError> {
    match cfg.resolved_index_path() {
        Some(path) if path.exists() => {
            let index = read_index(&path).map_err(data)?;
            if index.embedder_label() != embedder.identity_label() {
                return Err(CliError::Config(format!(
                    "index {} was built with {} but the configured embedder is {}",
                    path.display(),
                    index.embedder_label(),
                    embedder.identity_label()
                )));
            }
            if index.len() != corpus.len() {
                return Err(CliError::Data(format!(
                    "index {} has {} vectors but the corpus has {} documents",
                    path.display(),
                    index.len(),
                    corpus.len()
                )));
            }
            Ok(index)
        }
        _ => build_index(corpus, embedder).map_err(index_error),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub out_dir: PathBuf,
    pub traces_path: PathBuf,
}

pub const TRACES_FILE: &str = "traces.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";

/// Runs the configured mode over a sample of the dataset.
///
/// Configuration problems (including too few examples for the requested
/// demonstrations) are reported before any backend call. Examples whose
/// trace fails are listed in the report's `failed_examples`; the caller
/// decides the exit status.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let corpus_path = require(&cfg.corpus_path, "corpus")?;
    let dataset_path = require(&cfg.dataset_path, "dataset")?;

    let templates = match &cfg.templates_dir {
        Some(dir) => TemplateSet::load_dir(dir).map_err(|e| CliError::Config(e.to_string()))?,
        None => TemplateSet::default(),
    };
    let dataset = load_dataset(dataset_path).map_err(data)?;
    let n = cfg
        .sample_size
        .unwrap_or_else(|| DEFAULT_SAMPLE_SIZE.min(dataset.len()));
    let examples = subsample(&dataset, n, cfg.seed).map_err(|e| CliError::Config(e.to_string()))?;
    if examples.is_empty() {
        return Err(CliError::Data(format!("{} has no examples", dataset_path.display())));
    }
    let demos: Vec<_> = sample_demonstrations(&dataset, &examples, cfg.shots, cfg.seed.wrapping_add(1))
        .map_err(|e| match e {
            EvalError::InsufficientDemonstrations { .. } => CliError::Config(e.to_string()),
            other => data(other),
        })?
        .iter()
        .map(|e| e.to_demonstration())
        .collect();

    let targets = examples
        .iter()
        .flat_map(|e| e.gold_answers.iter().cloned())
        .collect();
    let backend = make_backend(cfg, targets)?;
    let embedder = make_embedder(cfg)?;
    let corpus = load_corpus(corpus_path).map_err(data)?;
    let index = load_or_build_index(cfg, &corpus, embedder.as_ref())?;

    let pipeline = Pipeline::new(&corpus, &index, embedder.as_ref(), backend.as_ref(), &templates);
    let results = pipeline.run_examples(&examples, cfg.mode, &cfg.itrg, &demos, cfg.in_flight);

    let mut traces: Vec<ItrgTrace> = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (example, result) in examples.iter().zip(results) {
        match result {
            Ok(mut trace) => {
                trace.config_snapshot.seed = Some(cfg.seed);
                traces.push(trace);
            }
            Err(e) => {
                eprintln!("example {}: {e}", example.example_id);
                failed.push(example.example_id.clone());
            }
        }
    }
    if traces.is_empty() {
        return Err(CliError::Backend(format!("all {} examples failed", failed.len())));
    }
    let mut report = evaluate_traces(&traces).map_err(data)?;
    report.failed_examples = failed;

    let out_dir = cfg.output_path.clone();
    fs::create_dir_all(&out_dir).map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;
    let traces_path = out_dir.join(TRACES_FILE);
    write_traces(&traces_path, &traces)?;
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(&out_dir.join(REPORT_JSON_FILE), report_json.as_bytes())?;
    write_file(&out_dir.join(REPORT_TEXT_FILE), report.to_table().as_bytes())?;

    Ok(RunOutcome {
        report,
        out_dir,
        traces_path,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_traces(path: &Path, traces: &[ItrgTrace]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
    for trace in traces {
        let line = serde_json::to_string(trace).expect("trace serializes");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a trace file written by `run`. Blank lines are skipped.
pub fn read_traces(path: &Path) -> Result<Vec<ItrgTrace>, CliError> {
    let raw = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut traces = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let trace = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!("{}: malformed trace on line {}: {e}", path.display(), i + 1))
        })?;
        traces.push(trace);
    }
    Ok(traces)
}

/// Recomputes the report from a trace file alone.
pub fn cmd_report(traces_path: &Path) -> Result<EvalReport, CliError> {
    let traces = read_traces(traces_path)?;
    if traces.is_empty() {
        return Err(CliError::Data(format!("{} contains no traces", traces_path.display())));
    }
    evaluate_traces(&traces).map_err(data)
}
