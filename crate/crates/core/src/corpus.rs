//! Paragraph corpus ingestion and lookup.
//!
//! A corpus file is UTF-8 JSON Lines, one `{"id", "title", "text"}` object
//! per line. An optional sidecar manifest (`<corpus file>.manifest.json`)
//! records the source label and the expected document count.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("empty id on line {line}")]
    EmptyId { line: usize },
    #[error("duplicate document id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("document {id:?} on line {line} has empty text")]
    EmptyText { id: String, line: usize },
    #[error("manifest {path} is invalid: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("document not found: {0:?}")]
    NotFound(String),
}

/// One corpus paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            text: text.into(),
        }
    }
}

/// Sidecar manifest written next to a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub source_label: String,
    pub document_count: usize,
}

/// An immutable, ordered collection of documents with total lookup by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    by_id: HashMap<String, usize>,
    source_label: String,
}

impl Corpus {
    /// Builds a corpus from documents in the given order, applying the same
    /// validation as [`load_corpus`]. Line numbers in errors are 1-based
    /// positions in `documents`.
    pub fn from_documents(
        documents: Vec<Document>,
        source_label: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            validate(doc, i + 1)?;
            if let Some(prev) = by_id.insert(doc.id.clone(), i) {
                return Err(CorpusError::DuplicateId {
                    id: doc.id.clone(),
                    first_line: prev + 1,
                    second_line: i + 1,
                });
            }
        }
        Ok(Self {
            documents,
            by_id,
            source_label: source_label.into(),
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    /// Looks up a document by id.
    pub fn get_document(&self, id: &str) -> Result<&Document, CorpusError> {
        self.by_id
            .get(id)
            .map(|&i| &self.documents[i])
            .ok_or_else(|| CorpusError::NotFound(id.to_string()))
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            source_label: self.source_label.clone(),
            document_count: self.documents.len(),
        }
    }
}

fn validate(doc: &Document, line: usize) -> Result<(), CorpusError> {
    if doc.id.is_empty() {
        return Err(CorpusError::EmptyId { line });
    }
    if doc.text.trim().is_empty() {
        return Err(CorpusError::EmptyText {
            id: doc.id.clone(),
            line,
        });
    }
    Ok(())
}

/// Path of the manifest sidecar for a corpus file.
pub fn manifest_path(corpus_path: &Path) -> PathBuf {
    let mut name = corpus_path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Loads a JSON Lines corpus in file order.
///
/// Blank lines are skipped but still counted for line numbers. When a
/// manifest sidecar exists its source label is used and its document count
/// must match; otherwise the file name becomes the source label.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let mut documents = Vec::new();
    let mut lines_of = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        validate(&doc, line_no)?;
        if let Some(&first) = by_id.get(&doc.id) {
            return Err(CorpusError::DuplicateId {
                id: doc.id,
                first_line: lines_of[first],
                second_line: line_no,
            });
        }
        by_id.insert(doc.id.clone(), documents.len());
        lines_of.push(line_no);
        documents.push(doc);
    }

    let mpath = manifest_path(path);
    let source_label = if mpath.exists() {
        let manifest = read_manifest(&mpath)?;
        if manifest.document_count != documents.len() {
            return Err(CorpusError::Manifest {
                path: mpath,
                message: format!(
                    "declares {} documents but the corpus has {}",
                    manifest.document_count,
                    documents.len()
                ),
            });
        }
        manifest.source_label
    } else {
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    };

    Ok(Corpus {
        documents,
        by_id,
        source_label,
    })
}

fn read_manifest(path: &Path) -> Result<CorpusManifest, CorpusError> {
    let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&raw).map_err(|e| CorpusError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes a corpus as JSON Lines plus its manifest sidecar.
pub fn write_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for doc in corpus.iter() {
        let line = serde_json::to_string(doc).expect("documents serialize");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;

    let mpath = manifest_path(path);
    let manifest = serde_json::to_string_pretty(&corpus.manifest()).expect("manifest serializes");
    fs::write(&mpath, manifest + "\n").map_err(|source| CorpusError::Io {
        path: mpath.clone(),
        source,
    })
}
