use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;

use super::CliError;
use crate::http::EndpointConfig;
use crate::orchestrator::{AnswerContext, ItrgConfig, Mode};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 2023;
/// Examples evaluated when no sample size is given (capped at the dataset size).
pub const DEFAULT_SAMPLE_SIZE: usize = 500;

pub const ENV_ENDPOINT: &str = "ITRG_ENDPOINT";
pub const ENV_AUTH_TOKEN: &str = "ITRG_AUTH_TOKEN";
pub const ENV_AUTH_HEADER: &str = "ITRG_AUTH_HEADER";
pub const ENV_EMBEDDER_ENDPOINT: &str = "ITRG_EMBEDDER_ENDPOINT";

/// Fully resolved settings for `index` and `run`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus_path: Option<PathBuf>,
    pub index_path: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
    pub templates_dir: Option<PathBuf>,
    pub output_path: PathBuf,
    pub mode: Mode,
    pub itrg: ItrgConfig,
    pub shots: usize,
    pub seed: u64,
    pub sample_size: Option<usize>,
    pub in_flight: usize,
    /// `mock-echo`, `mock-extractive`, `mock-map:<file>`, `remote`, or an http(s) URL.
    pub backend: String,
    /// `hash[:<dim>]` or `remote:<dim>`.
    pub embedder: String,
    pub embedder_model: String,
    pub endpoint: Option<String>,
    pub embedder_endpoint: Option<String>,
    pub auth_header: String,
    pub auth_token: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus_path: None,
            index_path: None,
            dataset_path: None,
            templates_dir: None,
            output_path: PathBuf::from("itrg-out"),
            mode: Mode::Refresh,
            itrg: ItrgConfig::default(),
            shots: 0,
            seed: DEFAULT_SEED,
            sample_size: None,
            in_flight: 4,
            backend: "mock-extractive".into(),
            embedder: "hash:1024".into(),
            embedder_model: "remote".into(),
            endpoint: None,
            embedder_endpoint: None,
            auth_header: "Authorization".into(),
            auth_token: None,
            timeout_secs: 60,
            retries: 3,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("invalid value {value:?} for {key}: {e}")))
}

impl RunConfig {
    /// Applies one `key = value` setting. Dashes and underscores in keys are
    /// interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "corpus" => self.corpus_path = Some(value.into()),
            "index" => self.index_path = Some(value.into()),
            "dataset" => self.dataset_path = Some(value.into()),
            "templates" => self.templates_dir = Some(value.into()),
            "out" => self.output_path = value.into(),
            "strategy" | "mode" => self.set_mode(parse(&key, value)?),
            "iterations" => self.itrg.iterations = parse(&key, value)?,
            "top_k" => self.itrg.top_k = parse(&key, value)?,
            "query_budget" => self.itrg.query_budget_chars = parse(&key, value)?,
            "answer_context" => self.itrg.answer_context = parse(&key, value)?,
            "doc_max_tokens" => self.itrg.doc_params.max_new_tokens = parse(&key, value)?,
            "answer_max_tokens" => self.itrg.answer_params.max_new_tokens = parse(&key, value)?,
            "shots" => self.shots = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "sample_size" => self.sample_size = Some(parse(&key, value)?),
            "in_flight" => self.in_flight = parse(&key, value)?,
            "backend" => self.backend = value.into(),
            "embedder" => self.embedder = value.into(),
            "embedder_model" => self.embedder_model = value.into(),
            "endpoint" => self.endpoint = Some(value.into()),
            "embedder_endpoint" => self.embedder_endpoint = Some(value.into()),
            "auth_header" => self.auth_header = value.into(),
            "auth_token" => self.auth_token = Some(value.into()),
            "timeout_secs" => self.timeout_secs = parse(&key, value)?,
            "retries" => self.retries = parse(&key, value)?,
            _ => return Err(CliError::Config(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        if let Some(s) = mode.strategy() {
            self.itrg.strategy = s;
        }
    }

    /// Reads a flat `key = value` file. Blank lines and lines starting with
    /// `#` are ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        for (i, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{}:{}: expected key = value", path.display(), i + 1))
            })?;
            self.set(key, value).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}:{}: {m}", path.display(), i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_env(&mut self, env: &dyn Fn(&str) -> Option<String>) {
        if let Some(v) = env(ENV_ENDPOINT) {
            self.endpoint = Some(v);
        }
        if let Some(v) = env(ENV_EMBEDDER_ENDPOINT) {
            self.embedder_endpoint = Some(v);
        }
        if let Some(v) = env(ENV_AUTH_HEADER) {
            self.auth_header = v;
        }
        if let Some(v) = env(ENV_AUTH_TOKEN) {
            self.auth_token = Some(v);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.itrg
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.in_flight == 0 {
            return Err(CliError::Config("in_flight must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn endpoint_config(&self, url: &str) -> EndpointConfig {
        let mut cfg = EndpointConfig::new(url);
        cfg.timeout = Duration::from_secs(self.timeout_secs);
        cfg.retries = self.retries;
        cfg.auth_header = self
            .auth_token
            .as_ref()
            .map(|token| (self.auth_header.clone(), token.clone()));
        cfg
    }

    /// Index path, defaulting to `<corpus>.idx`.
    pub fn resolved_index_path(&self) -> Option<PathBuf> {
        self.index_path.clone().or_else(|| {
            self.corpus_path.as_ref().map(|c| {
                let mut p = c.as_os_str().to_owned();
                p.push(".idx");
                PathBuf::from(p)
            })
        })
    }
}

/// Flags shared by `index` and `run`. Every flag overrides the config file
/// and the environment.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat key = value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus, JSON Lines.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Dense index file (default: <corpus>.idx).
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// QA dataset, JSON Lines with id, question and answers.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Directory with replacement prompt templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// refine, refresh, vanilla, retrieve-then-read or generate-then-read.
    #[arg(long)]
    pub strategy: Option<Mode>,
    /// Retrieval-generation rounds per question (default 5).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Paragraphs retrieved per round (default 5).
    #[arg(long)]
    pub top_k: Option<usize>,
    /// In-context demonstrations per answer prompt.
    #[arg(long)]
    pub shots: Option<usize>,
    /// Sampling seed (default 2023).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of dataset examples to evaluate.
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// mock-echo, mock-extractive, mock-map:<file>, remote, or a URL.
    #[arg(long)]
    pub backend: Option<String>,
    /// hash[:<dim>] or remote:<dim>.
    #[arg(long)]
    pub embedder: Option<String>,
    /// generated or generated+retrieved.
    #[arg(long)]
    pub answer_context: Option<AnswerContext>,
    /// Maximum concurrent examples.
    #[arg(long)]
    pub in_flight: Option<usize>,
    /// Output directory for run artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// defaults < config file < environment < flags.
    pub fn resolve(&self, env: &dyn Fn(&str) -> Option<String>) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_env(env);

        if let Some(v) = &self.corpus {
            cfg.corpus_path = Some(v.clone());
        }
        if let Some(v) = &self.index {
            cfg.index_path = Some(v.clone());
        }
        if let Some(v) = &self.dataset {
            cfg.dataset_path = Some(v.clone());
        }
        if let Some(v) = &self.templates {
            cfg.templates_dir = Some(v.clone());
        }
        if let Some(v) = self.strategy {
            cfg.set_mode(v);
        }
        if let Some(v) = self.iterations {
            cfg.itrg.iterations = v;
        }
        if let Some(v) = self.top_k {
            cfg.itrg.top_k = v;
        }
        if let Some(v) = self.shots {
            cfg.shots = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.sample_size {
            cfg.sample_size = Some(v);
        }
        if let Some(v) = &self.backend {
            cfg.backend = v.clone();
        }
        if let Some(v) = &self.embedder {
            cfg.embedder = v.clone();
        }
        if let Some(v) = self.answer_context {
            cfg.itrg.answer_context = v;
        }
        if let Some(v) = self.in_flight {
            cfg.in_flight = v;
        }
        if let Some(v) = &self.out {
            cfg.output_path = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
