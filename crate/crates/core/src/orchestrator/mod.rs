//! The iterative retrieval-generation loop.
//!
//! Every iteration `t` forms a query (the question alone at `t = 1`, the
//! question followed by the previous generated document afterwards),
//! retrieves the top-k paragraphs, generates a new document, and extracts an
//! answer from it.

mod config;
mod steps;

pub use config::{AnswerContext, ConfigSnapshot, ConfigError, ItrgConfig, Mode, RagStrategy};
pub use steps::{form_query, rag_refine, rag_refresh, update_set, QueryError};

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError};
use crate::eval::QaExample;
use crate::generator::{
    complete, extract_answer, join_passages, CompletionBackend, Demonstration, GeneratorError,
    TemplateSet,
};
use crate::retriever::{retrieve_top_k, DenseIndex, Embedder, RetrievalResult, RetrieverError};

/// One loop step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub t: usize,
    pub query: String,
    pub retrieved: RetrievalResult,
    pub generated_doc: String,
    pub answer: String,
    /// False only when refine found no new documents and kept the previous one.
    pub doc_regenerated: bool,
}

/// Everything recorded for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItrgTrace {
    pub example_id: String,
    pub question: String,
    #[serde(default)]
    pub gold_answers: Vec<String>,
    pub states: Vec<IterationState>,
    pub config_snapshot: ConfigSnapshot,
}

impl ItrgTrace {
    pub fn iterations(&self) -> usize {
        self.states.len()
    }

    pub fn final_state(&self) -> Option<&IterationState> {
        self.states.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Query,
    Retrieve,
    Generate,
    Answer,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Query => "query",
            Stage::Retrieve => "retrieve",
            Stage::Generate => "generate",
            Stage::Answer => "answer",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Retriever(#[from] RetrieverError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("refresh needs at least one retrieved document")]
    NothingRetrieved,
}

/// A failed trace: the iteration and stage where it stopped.
#[derive(Debug, thiserror::Error)]
#[error("iteration {t}, {stage} stage: {source}")]
pub struct OrchestratorError {
    pub t: usize,
    pub stage: Stage,
    #[source]
    pub source: StepError,
}

impl OrchestratorError {
    fn at(t: usize, stage: Stage) -> impl FnOnce(StepError) -> Self {
        move |source| Self { t, stage, source }
    }

    /// True when the failure came from the completion backend.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self.source,
            StepError::Generator(GeneratorError::Backend(_) | GeneratorError::EmptyOutput { .. })
        )
    }
}

/// Shared, read-only parts of a run. Cheap to copy; safe to use from many
/// threads at once.
#[derive(Clone, Copy)]
pub struct Pipeline<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a DenseIndex,
    pub embedder: &'a dyn Embedder,
    pub backend: &'a dyn CompletionBackend,
    pub templates: &'a TemplateSet,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        corpus: &'a Corpus,
        index: &'a DenseIndex,
        embedder: &'a dyn Embedder,
        backend: &'a dyn CompletionBackend,
        templates: &'a TemplateSet,
    ) -> Self {
        Self {
            corpus,
            index,
            embedder,
            backend,
            templates,
        }
    }

    fn snapshot(&self, mode: Mode, config: &ItrgConfig, shots: usize) -> ConfigSnapshot {
        let mut config = config.clone();
        if mode.is_baseline() {
            config.iterations = 1;
        }
        ConfigSnapshot {
            mode,
            refine_first_step: (mode == Mode::Refine).then(|| "refresh".to_string()),
            config,
            shots,
            seed: None,
            embedder_label: self.embedder.identity_label().to_string(),
            backend_label: self.backend.identity_label().to_string(),
            corpus_label: self.corpus.source_label().to_string(),
        }
    }

    fn answer(
        &self,
        question: &str,
        context: Option<&str>,
        config: &ItrgConfig,
        demos: &[Demonstration],
    ) -> Result<String, StepError> {
        let prompt = self.templates.render_answer(question, context, demos)?;
        let completion = complete(self.backend, &prompt, &config.answer_params)?;
        Ok(extract_answer(&completion))
    }

    fn context_for(
        &self,
        doc: &str,
        retrieved: &RetrievalResult,
        config: &ItrgConfig,
    ) -> Result<String, StepError> {
        Ok(match config.answer_context {
            AnswerContext::Generated => doc.to_string(),
            AnswerContext::GeneratedAndRetrieved => {
                let docs = retrieved
                    .ids()
                    .map(|id| self.corpus.get_document(id))
                    .collect::<Result<Vec<_>, _>>()?;
                format!("{}\n{doc}", join_passages(&docs))
            }
        })
    }

    /// Runs the full `T`-iteration loop for one question.
    pub fn run_itrg(
        &self,
        question: &str,
        config: &ItrgConfig,
        demos: &[Demonstration],
    ) -> Result<ItrgTrace, OrchestratorError> {
        config
            .validate()
            .map_err(|e| OrchestratorError::at(0, Stage::Config)(e.into()))?;
        let mut states: Vec<IterationState> = Vec::with_capacity(config.iterations);

        for t in 1..=config.iterations {
            let prev = states.last();
            let query = form_query(
                question,
                prev.map(|s| s.generated_doc.as_str()),
                t,
                config.query_budget_chars,
            )
            .map_err(|e| OrchestratorError::at(t, Stage::Query)(e.into()))?;

            let retrieved = retrieve_top_k(self.index, self.embedder, &query, config.top_k)
                .map_err(|e| OrchestratorError::at(t, Stage::Retrieve)(e.into()))?;

            let generated = match (config.strategy, prev) {
                (RagStrategy::Refine, Some(prev)) => rag_refine(
                    question,
                    &prev.generated_doc,
                    &retrieved,
                    &prev.retrieved,
                    self.backend,
                    self.corpus,
                    self.templates,
                    &config.doc_params,
                ),
                // No previous document exists at t = 1, so refine starts with refresh.
                _ => rag_refresh(
                    question,
                    &retrieved,
                    self.backend,
                    self.corpus,
                    self.templates,
                    &config.doc_params,
                )
                .map(|doc| (doc, true)),
            };
            let (generated_doc, doc_regenerated) =
                generated.map_err(OrchestratorError::at(t, Stage::Generate))?;

            let answer = self
                .context_for(&generated_doc, &retrieved, config)
                .and_then(|ctx| self.answer(question, Some(&ctx), config, demos))
                .map_err(OrchestratorError::at(t, Stage::Answer))?;

            states.push(IterationState {
                t,
                query,
                retrieved,
                generated_doc,
                answer,
                doc_regenerated,
            });
        }

        Ok(ItrgTrace {
            example_id: String::new(),
            question: question.to_string(),
            gold_answers: Vec::new(),
            states,
            config_snapshot: self.snapshot(Mode::from(config.strategy), config, demos.len()),
        })
    }

    /// Single-step baselines. Each returns a one-state trace.
    pub fn run_baseline(
        &self,
        question: &str,
        mode: Mode,
        config: &ItrgConfig,
        demos: &[Demonstration],
    ) -> Result<ItrgTrace, OrchestratorError> {
        if let Some(strategy) = mode.strategy() {
            return self.run_itrg(question, &config.clone().with_strategy(strategy), demos);
        }
        config
            .validate()
            .map_err(|e| OrchestratorError::at(0, Stage::Config)(e.into()))?;
        let empty = RetrievalResult::empty(config.top_k);

        let (retrieved, generated_doc, context) = match mode {
            Mode::Vanilla => (empty, String::new(), None),
            Mode::RetrieveThenRead => {
                let retrieved = retrieve_top_k(self.index, self.embedder, question, config.top_k)
                    .map_err(|e| OrchestratorError::at(1, Stage::Retrieve)(e.into()))?;
                let docs = retrieved
                    .ids()
                    .map(|id| self.corpus.get_document(id))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| OrchestratorError::at(1, Stage::Retrieve)(e.into()))?;
                let context = join_passages(&docs);
                (retrieved, String::new(), Some(context))
            }
            Mode::GenerateThenRead => {
                let doc = self
                    .templates
                    .render_generate(question)
                    .and_then(|p| complete(self.backend, &p, &config.doc_params))
                    .map_err(|e| OrchestratorError::at(1, Stage::Generate)(e.into()))?;
                (empty, doc.clone(), Some(doc))
            }
            Mode::Refine | Mode::Refresh => unreachable!("handled above"),
        };

        let answer = self
            .answer(question, context.as_deref(), config, demos)
            .map_err(OrchestratorError::at(1, Stage::Answer))?;
        let doc_regenerated = mode == Mode::GenerateThenRead;
        Ok(ItrgTrace {
            example_id: String::new(),
            question: question.to_string(),
            gold_answers: Vec::new(),
            states: vec![IterationState {
                t: 1,
                query: question.to_string(),
                retrieved,
                generated_doc,
                answer,
                doc_regenerated,
            }],
            config_snapshot: self.snapshot(mode, config, demos.len()),
        })
    }

    /// Runs `mode` for one dataset example and tags the trace with its id
    /// and gold answers.
    pub fn run_example(
        &self,
        example: &QaExample,
        mode: Mode,
        config: &ItrgConfig,
        demos: &[Demonstration],
    ) -> Result<ItrgTrace, OrchestratorError> {
        let mut trace = self.run_baseline(&example.question, mode, config, demos)?;
        trace.example_id = example.example_id.clone();
        trace.gold_answers = example.gold_answers.clone();
        Ok(trace)
    }

    /// Runs many examples on at most `max_in_flight` worker threads. Results
    /// come back in input order regardless of completion order.
    pub fn run_examples(
        &self,
        examples: &[QaExample],
        mode: Mode,
        config: &ItrgConfig,
        demos: &[Demonstration],
        max_in_flight: usize,
    ) -> Vec<Result<ItrgTrace, OrchestratorError>> {
        let limit = self
            .backend
            .max_in_flight()
            .map_or(max_in_flight, |b| b.min(max_in_flight))
            .max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(limit)
            .build()
            .expect("worker pool");
        pool.install(|| {
            examples
                .par_iter()
                .map(|ex| self.run_example(ex, mode, config, demos))
                .collect()
        })
    }
}

#[cfg(test)]
mod tests;
