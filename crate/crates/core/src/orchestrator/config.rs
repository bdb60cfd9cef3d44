use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::generator::DecodingParams;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error("top_k must be at least 1")]
    ZeroTopK,
    #[error("query budget must be at least 1 character")]
    ZeroBudget,
    #[error("unknown mode {0:?}; expected refine, refresh, vanilla, retrieve-then-read or generate-then-read")]
    UnknownMode(String),
    #[error("unknown answer context {0:?}; expected generated or generated+retrieved")]
    UnknownAnswerContext(String),
}

/// How a new document is produced from retrieved paragraphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RagStrategy {
    /// Revise the previous document using only newly retrieved paragraphs.
    Refine,
    /// Regenerate from all currently retrieved paragraphs.
    Refresh,
}

/// What the per-iteration answer prompt is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerContext {
    #[default]
    Generated,
    GeneratedAndRetrieved,
}

impl FromStr for AnswerContext {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generated" => Ok(Self::Generated),
            "generated+retrieved" | "generated_and_retrieved" => Ok(Self::GeneratedAndRetrieved),
            other => Err(ConfigError::UnknownAnswerContext(other.to_string())),
        }
    }
}

/// Loop parameters. Defaults: 5 iterations, top-5, refresh, greedy decoding
/// with 200-token documents and 15-token answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItrgConfig {
    pub iterations: usize,
    pub top_k: usize,
    pub strategy: RagStrategy,
    pub doc_params: DecodingParams,
    pub answer_params: DecodingParams,
    pub query_budget_chars: usize,
    #[serde(default)]
    pub answer_context: AnswerContext,
}

impl Default for ItrgConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            top_k: 5,
            strategy: RagStrategy::Refresh,
            doc_params: DecodingParams::document(),
            answer_params: DecodingParams::answer(),
            query_budget_chars: 4096,
            answer_context: AnswerContext::Generated,
        }
    }
}

impl ItrgConfig {
    pub fn with_strategy(mut self, strategy: RagStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::ZeroIterations);
        }
        if self.top_k == 0 {
            return Err(ConfigError::ZeroTopK);
        }
        if self.query_budget_chars == 0 {
            return Err(ConfigError::ZeroBudget);
        }
        Ok(())
    }
}

/// The iterative strategies plus the three single-step baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Refine,
    Refresh,
    Vanilla,
    RetrieveThenRead,
    GenerateThenRead,
}

impl Mode {
    pub fn is_baseline(self) -> bool {
        self.strategy().is_none()
    }

    pub fn strategy(self) -> Option<RagStrategy> {
        match self {
            Mode::Refine => Some(RagStrategy::Refine),
            Mode::Refresh => Some(RagStrategy::Refresh),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Refine => "refine",
            Mode::Refresh => "refresh",
            Mode::Vanilla => "vanilla",
            Mode::RetrieveThenRead => "retrieve-then-read",
            Mode::GenerateThenRead => "generate-then-read",
        }
    }
}

impl From<RagStrategy> for Mode {
    fn from(s: RagStrategy) -> Self {
        match s {
            RagStrategy::Refine => Mode::Refine,
            RagStrategy::Refresh => Mode::Refresh,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "refine" => Ok(Mode::Refine),
            "refresh" => Ok(Mode::Refresh),
            "vanilla" => Ok(Mode::Vanilla),
            "retrieve-then-read" => Ok(Mode::RetrieveThenRead),
            "generate-then-read" => Ok(Mode::GenerateThenRead),
            _ => Err(ConfigError::UnknownMode(s.to_string())),
        }
    }
}

/// Configuration embedded in every trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub mode: Mode,
    /// Set for refine runs: the prompt used at the first iteration, where no
    /// previous document exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_first_step: Option<String>,
    pub config: ItrgConfig,
    pub shots: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub embedder_label: String,
    pub backend_label: String,
    #[serde(default)]
    pub corpus_label: String,
}
