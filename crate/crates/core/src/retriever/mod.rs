//! Dense retrieval: a shared encoder embeds both queries and documents, and
//! documents are ranked by cosine similarity to the query.

mod embedder;
mod index;
mod persist;

pub use embedder::{EmbedError, Embedder, HashingEmbedder, RemoteEmbedder};
pub use index::{build_index, retrieve_top_k, DenseIndex};
pub use persist::{decode_index, encode_index, read_index, write_index, INDEX_MAGIC, INDEX_VERSION};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum RetrieverError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding vector has zero norm")]
    ZeroNorm,
    #[error("embedding vector is empty")]
    EmptyVector,
    #[error("embedding vector has a non-finite value at position {0}")]
    NonFinite(usize),
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
    #[error("embedding failed for document {doc_id:?}: {source}")]
    EmbedDocument {
        doc_id: String,
        #[source]
        source: EmbedError,
    },
    #[error("embedding failed for query: {0}")]
    EmbedQuery(#[source] EmbedError),
    #[error("index was built with embedder {index:?} but queried with {embedder:?}")]
    LabelMismatch { index: String, embedder: String },
    #[error("query text is empty")]
    EmptyQuery,
    #[error("k must be positive")]
    ZeroK,
    #[error("index file {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid index file: {0}")]
    Format(String),
}

/// A finite, non-zero embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, RetrieverError> {
        if values.is_empty() {
            return Err(RetrieverError::EmptyVector);
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(RetrieverError::NonFinite(pos));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(RetrieverError::ZeroNorm);
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = RetrieverError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine from a precomputed dot product and norms. The index and
/// [`cosine_similarity`] both go through here so their scores agree bit for bit.
#[inline]
pub(crate) fn cosine_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    dot / (norm_a * norm_b)
}

/// `dot(a, b) / (|a| |b|)`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrieverError> {
    if a.dim() != b.dim() {
        return Err(RetrieverError::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    // Subnormal inputs can still underflow to a zero norm.
    if na == 0.0 || nb == 0.0 {
        return Err(RetrieverError::ZeroNorm);
    }
    Ok(cosine_from_parts(dot(a.values(), b.values()), na, nb))
}

/// Which search path produced a [`RetrievalResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SearchBackend {
    #[default]
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Ranked top-k documents: score descending, ties by ascending doc id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub k: usize,
    #[serde(default)]
    pub backend: SearchBackend,
    pub entries: Vec<ScoredDoc>,
}

impl RetrievalResult {
    /// A result with no entries, used by modes that skip retrieval.
    pub fn empty(k: usize) -> Self {
        Self {
            k,
            backend: SearchBackend::Exact,
            entries: Vec::new(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
