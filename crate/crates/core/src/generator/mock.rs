//! Deterministic completion backends for offline runs and tests.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{prompt_hash, BackendError, CompletionBackend, DecodingParams};

/// Returns a fixed output per exact prompt.
#[derive(Debug, Default)]
pub struct MapBackend {
    responses: HashMap<String, String>,
    fallback: Option<String>,
    calls: AtomicUsize,
}

impl MapBackend {
    pub fn new<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Self {
            responses: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            fallback: None,
            calls: AtomicUsize::new(0),
        }
    }

    /// Output for prompts that have no entry. Without one, unknown prompts fail.
    pub fn with_fallback(mut self, output: impl Into<String>) -> Self {
        self.fallback = Some(output.into());
        self
    }

    pub fn insert(&mut self, prompt: impl Into<String>, output: impl Into<String>) {
        self.responses.insert(prompt.into(), output.into());
    }

    /// Loads a JSON object mapping prompts to outputs.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let map: HashMap<String, String> =
            serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Self::new(map))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl CompletionBackend for MapBackend {
    fn identity_label(&self) -> &str {
        "mock-map"
    }

    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.responses
            .get(prompt)
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| BackendError::NoMockResponse {
                prompt_hash: prompt_hash(prompt),
            })
    }
}

/// Answers every prompt with a string derived from its hash.
#[derive(Debug, Default)]
pub struct EchoBackend;

impl CompletionBackend for EchoBackend {
    fn identity_label(&self) -> &str {
        "mock-echo"
    }

    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, BackendError> {
        Ok(format!("echo {}", prompt_hash(prompt)))
    }
}

/// Reads the last passage section of the prompt and copies text out of it.
///
/// Document prompts get the first sentence that contains one of the target
/// strings, or else the passage's lead sentence. Answer prompts (those ending
/// with the answer cue) get the matching target itself, or the fallback
/// answer. Prompts without a passage get the fallback document or answer.
#[derive(Debug, Clone)]
pub struct ExtractiveBackend {
    targets: Vec<String>,
    answer_cue: String,
    fallback_document: String,
    fallback_answer: String,
}

impl ExtractiveBackend {
    pub fn new<S: Into<String>>(targets: impl IntoIterator<Item = S>) -> Self {
        Self {
            targets: targets.into_iter().map(Into::into).filter(|t: &String| !t.trim().is_empty()).collect(),
            answer_cue: "Answer:".into(),
            fallback_document: "No relevant passage was available.".into(),
            fallback_answer: "unknown".into(),
        }
    }

    pub fn with_fallback_answer(mut self, answer: impl Into<String>) -> Self {
        self.fallback_answer = answer.into();
        self
    }

    pub fn with_fallback_document(mut self, doc: impl Into<String>) -> Self {
        self.fallback_document = doc.into();
        self
    }

    fn find_target<'t>(&'t self, text: &str) -> Option<&'t str> {
        let lower = text.to_lowercase();
        self.targets
            .iter()
            .find(|t| lower.contains(&t.to_lowercase()))
            .map(String::as_str)
    }
}

/// Text of the last `Passage:` section, up to its `Question:` line.
fn last_passage(prompt: &str) -> Option<&str> {
    let block = &prompt[prompt.rfind("\n\n").map_or(0, |i| i + 2)..];
    let start = block.find("Passage: ")? + "Passage: ".len();
    let rest = &block[start..];
    let end = rest.rfind("\nQuestion:").unwrap_or(rest.len());
    Some(&rest[..end])
}

/// Splits on newlines and after `.`, `!` or `?` followed by whitespace.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let end = match c {
            '\n' => Some(i),
            '.' | '!' | '?' => match chars.peek() {
                Some(&(_, n)) if n.is_whitespace() => Some(i + c.len_utf8()),
                None => Some(i + c.len_utf8()),
                _ => None,
            },
            _ => None,
        };
        if let Some(end) = end {
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

impl CompletionBackend for ExtractiveBackend {
    fn identity_label(&self) -> &str {
        "mock-extractive"
    }

    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, BackendError> {
        let passage = last_passage(prompt);
        if prompt.trim_end().ends_with(&self.answer_cue) {
            let answer = passage
                .and_then(|p| self.find_target(p))
                .unwrap_or(&self.fallback_answer);
            return Ok(answer.to_string());
        }
        let Some(passage) = passage else {
            return Ok(self.fallback_document.clone());
        };
        let sents = sentences(passage);
        let chosen = sents
            .iter()
            .find(|s| self.find_target(s).is_some())
            .or(sents.first())
            .copied()
            .unwrap_or(self.fallback_document.as_str());
        Ok(chosen.to_string())
    }
}

/// Wraps a backend and records every prompt it receives.
#[derive(Debug)]
pub struct RecordingBackend<B> {
    inner: B,
    prompts: Mutex<Vec<String>>,
}

impl<B> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }

    pub fn calls(&self) -> usize {
        self.prompts.lock().unwrap().len()
    }

    /// Calls whose prompt ends with `cue`, e.g. `"Document:"`.
    pub fn calls_ending_with(&self, cue: &str) -> usize {
        self.prompts
            .lock()
            .unwrap()
            .iter()
            .filter(|p| p.trim_end().ends_with(cue))
            .count()
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn identity_label(&self) -> &str {
        self.inner.identity_label()
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        self.inner.complete(prompt, params)
    }

    fn max_in_flight(&self) -> Option<usize> {
        self.inner.max_in_flight()
    }
}
