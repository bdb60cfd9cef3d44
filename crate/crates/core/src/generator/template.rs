//! Prompt templates with `{{slot}}` markers.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("{template} template: slot {{{{{slot}}}}} was not filled")]
    UnfilledSlot { template: TemplateName, slot: String },
    #[error("{template} template: unterminated slot marker at byte {offset}")]
    Unterminated { template: TemplateName, offset: usize },
    #[error("{template} template: invalid slot name {slot:?}")]
    BadSlotName { template: TemplateName, slot: String },
    #[error("{template} template is missing required slot {{{{{slot}}}}}")]
    MissingSlot { template: TemplateName, slot: &'static str },
    #[error("{template} template uses unknown slot {{{{{slot}}}}}")]
    UnknownSlot { template: TemplateName, slot: String },
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Refresh,
    Refine,
    /// Document generation from the question alone (generate-then-read).
    Generate,
    Answer,
    VanillaAnswer,
}

impl TemplateName {
    pub const ALL: [TemplateName; 5] = [
        TemplateName::Refresh,
        TemplateName::Refine,
        TemplateName::Generate,
        TemplateName::Answer,
        TemplateName::VanillaAnswer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Refresh => "refresh",
            TemplateName::Refine => "refine",
            TemplateName::Generate => "generate",
            TemplateName::Answer => "answer",
            TemplateName::VanillaAnswer => "vanilla_answer",
        }
    }

    pub fn required_slots(self) -> &'static [&'static str] {
        match self {
            TemplateName::Refresh => &["passages", "question"],
            TemplateName::Refine => &["draft", "passages", "question"],
            TemplateName::Generate => &["question"],
            TemplateName::Answer => &["context", "question"],
            TemplateName::VanillaAnswer => &["question"],
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DOCUMENT_INSTRUCTION: &str =
    "In the following task, you should write a document that contains the answer to the question.";

pub const REFRESH_TEMPLATE: &str = "In the following task, you should write a document that contains the answer to the question.\n\nPassage: {{passages}}\nQuestion: {{question}}\nDocument:";

pub const REFINE_TEMPLATE: &str = "In the following task, you should write a document that contains the answer to the question.\n\nHere is a draft document you previously wrote:\n{{draft}}\n\nImprove the draft using the new passages below.\n\nPassage: {{passages}}\nQuestion: {{question}}\nDocument:";

pub const GENERATE_TEMPLATE: &str = "In the following task, you should write a document that contains the answer to the question.\n\nQuestion: {{question}}\nDocument:";

pub const ANSWER_TEMPLATE: &str = "Passage: {{context}}\nQuestion: {{question}}\nAnswer:";

pub const VANILLA_ANSWER_TEMPLATE: &str = "Question: {{question}}\nAnswer:";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
}

/// A parsed template. Parsing checks marker syntax only; whether every slot
/// gets a value is checked when rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: TemplateName,
    body: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn parse(name: TemplateName, body: impl Into<String>) -> Result<Self, TemplateError> {
        let body = body.into();
        let mut pieces = Vec::new();
        let mut rest = body.as_str();
        let mut offset = 0;
        while let Some(open) = rest.find("{{") {
            if open > 0 {
                pieces.push(Piece::Text(rest[..open].to_string()));
            }
            let after = &rest[open + 2..];
            let close = after.find("}}").ok_or(TemplateError::Unterminated {
                template: name,
                offset: offset + open,
            })?;
            let slot = after[..close].trim();
            if slot.is_empty() || !slot.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(TemplateError::BadSlotName {
                    template: name,
                    slot: slot.to_string(),
                });
            }
            pieces.push(Piece::Slot(slot.to_string()));
            let consumed = open + 2 + close + 2;
            offset += consumed;
            rest = &rest[consumed..];
        }
        if !rest.is_empty() {
            pieces.push(Piece::Text(rest.to_string()));
        }
        Ok(Self { name, body, pieces })
    }

    pub fn name(&self) -> TemplateName {
        self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot(s) => Some(s.as_str()),
            Piece::Text(_) => None,
        })
    }

    /// Checks that the template uses exactly the slots its kind provides.
    pub fn validate(&self) -> Result<(), TemplateError> {
        let required = self.name.required_slots();
        for &slot in required {
            if !self.slots().any(|s| s == slot) {
                return Err(TemplateError::MissingSlot {
                    template: self.name,
                    slot,
                });
            }
        }
        if let Some(extra) = self.slots().find(|s| !required.contains(s)) {
            return Err(TemplateError::UnknownSlot {
                template: self.name,
                slot: extra.to_string(),
            });
        }
        Ok(())
    }

    /// Substitutes slot values in a single pass; values are not rescanned.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.body.len() + values.iter().map(|v| v.1.len()).sum::<usize>());
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => {
                    let value = values
                        .iter()
                        .find(|(k, _)| k == s)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| TemplateError::UnfilledSlot {
                            template: self.name,
                            slot: s.clone(),
                        })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

/// One few-shot demonstration for the answer prompt. Demonstrations without
/// a context are rendered with the vanilla (question-only) block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub question: String,
    pub context: Option<String>,
    pub answer: String,
}

/// The full set of prompt templates used by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub refresh: PromptTemplate,
    pub refine: PromptTemplate,
    pub generate: PromptTemplate,
    pub answer: PromptTemplate,
    pub vanilla_answer: PromptTemplate,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let t = |name, body| PromptTemplate::parse(name, body).expect("built-in template parses");
        Self {
            refresh: t(TemplateName::Refresh, REFRESH_TEMPLATE),
            refine: t(TemplateName::Refine, REFINE_TEMPLATE),
            generate: t(TemplateName::Generate, GENERATE_TEMPLATE),
            answer: t(TemplateName::Answer, ANSWER_TEMPLATE),
            vanilla_answer: t(TemplateName::VanillaAnswer, VANILLA_ANSWER_TEMPLATE),
        }
    }
}

impl TemplateSet {
    /// Loads `<name>.txt` overrides from `dir`; missing files keep the
    /// built-in template. Every template is validated.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let dir = dir.as_ref();
        let mut set = Self::default();
        for name in TemplateName::ALL {
            let path = dir.join(format!("{}.txt", name.as_str()));
            if !path.exists() {
                continue;
            }
            let body = fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let body = body.strip_suffix('\n').unwrap_or(&body);
            let tpl = PromptTemplate::parse(name, body)?;
            tpl.validate()?;
            *set.get_mut(name) = tpl;
        }
        Ok(set)
    }

    pub fn get(&self, name: TemplateName) -> &PromptTemplate {
        match name {
            TemplateName::Refresh => &self.refresh,
            TemplateName::Refine => &self.refine,
            TemplateName::Generate => &self.generate,
            TemplateName::Answer => &self.answer,
            TemplateName::VanillaAnswer => &self.vanilla_answer,
        }
    }

    fn get_mut(&mut self, name: TemplateName) -> &mut PromptTemplate {
        match name {
            TemplateName::Refresh => &mut self.refresh,
            TemplateName::Refine => &mut self.refine,
            TemplateName::Generate => &mut self.generate,
            TemplateName::Answer => &mut self.answer,
            TemplateName::VanillaAnswer => &mut self.vanilla_answer,
        }
    }

    /// Refresh prompt over all retrieved documents.
    pub fn render_refresh(&self, question: &str, docs: &[&Document]) -> Result<String, super::GeneratorError> {
        if docs.is_empty() {
            return Err(super::GeneratorError::NoDocuments(TemplateName::Refresh));
        }
        let passages = join_passages(docs);
        Ok(self
            .refresh
            .render(&[("passages", &passages), ("question", question)])?)
    }

    /// Refine prompt: the previous draft plus only the newly retrieved documents.
    pub fn render_refine(
        &self,
        draft: &str,
        question: &str,
        update_docs: &[&Document],
    ) -> Result<String, super::GeneratorError> {
        if update_docs.is_empty() {
            return Err(super::GeneratorError::NoDocuments(TemplateName::Refine));
        }
        let passages = join_passages(update_docs);
        Ok(self.refine.render(&[
            ("draft", draft),
            ("passages", &passages),
            ("question", question),
        ])?)
    }

    pub fn render_generate(&self, question: &str) -> Result<String, super::GeneratorError> {
        Ok(self.generate.render(&[("question", question)])?)
    }

    /// Demonstration blocks in order, then the target block ending in the
    /// answer cue. A `None` context renders the question-only block.
    pub fn render_answer(
        &self,
        question: &str,
        context: Option<&str>,
        demonstrations: &[Demonstration],
    ) -> Result<String, super::GeneratorError> {
        let mut blocks = Vec::with_capacity(demonstrations.len() + 1);
        for demo in demonstrations {
            let block = self.answer_block(&demo.question, demo.context.as_deref())?;
            blocks.push(format!("{block} {}", demo.answer));
        }
        blocks.push(self.answer_block(question, context)?);
        Ok(blocks.join("\n\n"))
    }

    fn answer_block(&self, question: &str, context: Option<&str>) -> Result<String, TemplateError> {
        match context {
            Some(ctx) => self.answer.render(&[("context", ctx), ("question", question)]),
            None => self.vanilla_answer.render(&[("question", question)]),
        }
    }
}

/// Document texts joined by a single newline, without titles.
pub fn join_passages(docs: &[&Document]) -> String {
    docs.iter()
        .map(|d| d.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}
