//! Prompt rendering and text completion.

mod backend;
pub mod mock;
mod template;

pub use backend::{BackendError, CompletionBackend, RemoteBackend};
pub use template::{
    join_passages, Demonstration, PromptTemplate, TemplateError, TemplateName, TemplateSet,
    ANSWER_TEMPLATE, DOCUMENT_INSTRUCTION, GENERATE_TEMPLATE, REFINE_TEMPLATE, REFRESH_TEMPLATE,
    VANILLA_ANSWER_TEMPLATE,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Document;

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("{0} prompt needs at least one document")]
    NoDocuments(TemplateName),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("backend returned empty output for prompt {prompt_hash}")]
    EmptyOutput { prompt_hash: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingStrategy {
    #[default]
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub strategy: DecodingStrategy,
    pub max_new_tokens: u32,
}

impl DecodingParams {
    pub const DOCUMENT_TOKENS: u32 = 200;
    pub const ANSWER_TOKENS: u32 = 15;

    pub fn greedy(max_new_tokens: u32) -> Self {
        Self {
            strategy: DecodingStrategy::Greedy,
            max_new_tokens,
        }
    }

    /// Greedy, 200 new tokens.
    pub fn document() -> Self {
        Self::greedy(Self::DOCUMENT_TOKENS)
    }

    /// Greedy, 15 new tokens.
    pub fn answer() -> Self {
        Self::greedy(Self::ANSWER_TOKENS)
    }
}

/// Short stable identifier for a prompt, used in error messages.
pub fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs one completion. The backend's output is returned with leading
/// whitespace removed; an output that is empty after trimming is an error.
pub fn complete(
    backend: &dyn CompletionBackend,
    prompt: &str,
    params: &DecodingParams,
) -> Result<String, GeneratorError> {
    if prompt.is_empty() {
        return Err(GeneratorError::EmptyPrompt);
    }
    let raw = backend.complete(prompt, params)?;
    let text = raw.trim_start();
    if text.trim_end().is_empty() {
        return Err(GeneratorError::EmptyOutput {
            prompt_hash: prompt_hash(prompt),
        });
    }
    Ok(text.to_string())
}

/// The answer is the completion up to its first newline, trimmed.
pub fn extract_answer(completion: &str) -> String {
    completion.lines().next().unwrap_or("").trim().to_string()
}

pub fn render_refresh_prompt(question: &str, docs: &[&Document]) -> Result<String, GeneratorError> {
    TemplateSet::default().render_refresh(question, docs)
}

pub fn render_refine_prompt(
    draft: &str,
    question: &str,
    update_docs: &[&Document],
) -> Result<String, GeneratorError> {
    TemplateSet::default().render_refine(draft, question, update_docs)
}

pub fn render_answer_prompt(
    question: &str,
    context: Option<&str>,
    demonstrations: &[Demonstration],
) -> Result<String, GeneratorError> {
    TemplateSet::default().render_answer(question, context, demonstrations)
}
