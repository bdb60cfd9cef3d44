use std::collections::HashSet;

use super::StepError;
use crate::corpus::{Corpus, Document};
use crate::generator::{complete, CompletionBackend, DecodingParams, TemplateSet};
use crate::retriever::{RetrievalResult, ScoredDoc};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("iterations are numbered from 1")]
    ZeroIteration,
    #[error("iteration {0} needs the previous generated document")]
    MissingPrevious(usize),
    #[error("the first iteration must not receive a previous document")]
    UnexpectedPrevious,
}

/// The retrieval query for iteration `t`.
///
/// At `t = 1` this is the question itself. Later it is the question, a single
/// space, and the previous document, cut to `budget` characters. Only the
/// previous document is ever shortened: if the question alone leaves no room,
/// the question is returned unchanged.
pub fn form_query(
    question: &str,
    previous_doc: Option<&str>,
    t: usize,
    budget: usize,
) -> Result<String, QueryError> {
    match (t, previous_doc) {
        (0, _) => Err(QueryError::ZeroIteration),
        (1, None) => Ok(question.to_string()),
        (1, Some(_)) => Err(QueryError::UnexpectedPrevious),
        (t, None) => Err(QueryError::MissingPrevious(t)),
        (_, Some(doc)) => {
            let used = question.chars().count() + 1;
            if used >= budget {
                return Ok(question.to_string());
            }
            let mut query = String::with_capacity(question.len() + 1 + doc.len().min(budget * 4));
            query.push_str(question);
            query.push(' ');
            query.extend(doc.chars().take(budget - used));
            Ok(query)
        }
    }
}

/// Entries of `now` whose ids are not in `previous`, in `now`'s rank order.
pub fn update_set<'r>(now: &'r RetrievalResult, previous: &RetrievalResult) -> Vec<&'r ScoredDoc> {
    let seen: HashSet<&str> = previous.ids().collect();
    now.entries
        .iter()
        .filter(|e| !seen.contains(e.doc_id.as_str()))
        .collect()
}

fn resolve<'c, 'i>(
    corpus: &'c Corpus,
    ids: impl Iterator<Item = &'i str>,
) -> Result<Vec<&'c Document>, StepError> {
    ids
        .map(|id| corpus.get_document(id).map_err(StepError::from))
        .collect()
}

/// Generates a document from the question and every retrieved paragraph.
pub fn rag_refresh(
    question: &str,
    retrieved: &RetrievalResult,
    backend: &dyn CompletionBackend,
    corpus: &Corpus,
    templates: &TemplateSet,
    params: &DecodingParams,
) -> Result<String, StepError> {
    if retrieved.is_empty() {
        return Err(StepError::NothingRetrieved);
    }
    let docs = resolve(corpus, retrieved.entries.iter().map(|e| e.doc_id.as_str()))?;
    let prompt = templates.render_refresh(question, &docs)?;
    Ok(complete(backend, &prompt, params)?)
}

/// Revises `previous_doc` with the paragraphs retrieved now but not last
/// time. With no such paragraphs the previous document is returned as is,
/// without calling the backend, and the flag is `false`.
#[allow(clippy::too_many_arguments)]
pub fn rag_refine(
    question: &str,
    previous_doc: &str,
    retrieved_now: &RetrievalResult,
    retrieved_prev: &RetrievalResult,
    backend: &dyn CompletionBackend,
    corpus: &Corpus,
    templates: &TemplateSet,
    params: &DecodingParams,
) -> Result<(String, bool), StepError> {
    let update = update_set(retrieved_now, retrieved_prev);
    if update.is_empty() {
        return Ok((previous_doc.to_string(), false));
    }
    let ids: Vec<&str> = update.iter().map(|e| e.doc_id.as_str()).collect();
    let docs = resolve(corpus, ids.into_iter())?;
    let prompt = templates.render_refine(previous_doc, question, &docs)?;
    Ok((complete(backend, &prompt, params)?, true))
}
