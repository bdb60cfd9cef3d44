use serde::{Deserialize, Serialize};

use super::{EmbeddingVector, RetrieverError};
use crate::http::{EndpointConfig, HttpError, JsonClient};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding request failed: {0}")]
    Remote(String),
    #[error("embedder returned {got} vectors for {expected} inputs")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedder produced an invalid vector: {0}")]
    Invalid(#[from] Box<RetrieverError>),
}

impl From<RetrieverError> for EmbedError {
    fn from(e: RetrieverError) -> Self {
        EmbedError::Invalid(Box::new(e))
    }
}

impl From<HttpError> for EmbedError {
    fn from(e: HttpError) -> Self {
        EmbedError::Remote(e.to_string())
    }
}

/// Shared text encoder used for both queries and documents.
///
/// Implementations must be deterministic and must never return the zero
/// vector. Neural implementations are expected to mean-pool the last hidden
/// layer over the input tokens; the identity label should then record the
/// model, output dimension and truncation length.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn identity_label(&self) -> &str;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Hashed unigram counts, L2-normalized.
///
/// Tokens are maximal runs of alphanumeric characters, lowercased. Each token
/// is hashed with seeded 64-bit FNV-1a into one of `dim` buckets. Text with no
/// tokens maps to a fixed sentinel bucket so the vector is never zero.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
    label: String,
}

impl HashingEmbedder {
    pub const DEFAULT_SEED: u64 = 0x5eed_17a6;
    pub const DEFAULT_DIM: usize = 1024;

    pub fn new(dim: usize) -> Self {
        Self::with_seed(dim, Self::DEFAULT_SEED)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            seed,
            label: format!("hash-unigram-v1/dim={dim}/seed={seed:#x}"),
        }
    }

    fn bucket(&self, token: &str) -> usize {
        const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = FNV_OFFSET ^ self.seed;
        for b in token.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        (h % self.dim as u64) as usize
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

/// Lowercased alphanumeric tokens.
pub(crate) fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn identity_label(&self) -> &str {
        &self.label
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut counts = vec![0.0f64; self.dim];
        let mut any = false;
        for token in tokenize(text) {
            counts[self.bucket(&token)] += 1.0;
            any = true;
        }
        if !any {
            counts[self.bucket("\u{0}")] = 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in &mut counts {
            *c /= norm;
        }
        Ok(EmbeddingVector::new(counts)?)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Embedder backed by a JSON-over-HTTP service.
///
/// Request: `{"input": [strings]}`. Response: `{"embeddings": [[reals]]}`.
pub struct RemoteEmbedder {
    client: JsonClient,
    dim: usize,
    label: String,
}

impl RemoteEmbedder {
    /// `label` should identify the model; the declared dimension is appended.
    pub fn new(endpoint: EndpointConfig, dim: usize, label: &str) -> Result<Self, EmbedError> {
        Ok(Self {
            client: JsonClient::new(endpoint)?,
            dim,
            label: format!("{label}/dim={dim}"),
        })
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        self.client.config()
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn identity_label(&self) -> &str {
        &self.label
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let resp: EmbedResponse = self.client.post(&EmbedRequest { input: texts })?;
        if resp.embeddings.len() != texts.len() {
            return Err(EmbedError::CountMismatch {
                expected: texts.len(),
                got: resp.embeddings.len(),
            });
        }
        resp.embeddings
            .into_iter()
            .map(|values| {
                if values.len() != self.dim {
                    return Err(RetrieverError::DimensionMismatch {
                        expected: self.dim,
                        actual: values.len(),
                    }
                    .into());
                }
                Ok(EmbeddingVector::new(values)?)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashing_embedder_is_deterministic_and_normalized() {
        let e = HashingEmbedder::new(64);
        let a = e.embed("The Eiffel Tower is in Paris").unwrap();
        let b = e.embed("The Eiffel Tower is in Paris").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_eq!(a.dim(), 64);
    }

    #[test]
    fn case_and_punctuation_do_not_matter() {
        let e = HashingEmbedder::new(128);
        assert_eq!(e.embed("Hello, World!").unwrap(), e.embed("hello world").unwrap());
    }

    #[test]
    fn tokenless_text_is_not_zero() {
        let e = HashingEmbedder::new(8);
        let v = e.embed("  ?!  ").unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert_eq!(v, e.embed("").unwrap());
    }

    #[test]
    fn label_records_dim_and_seed() {
        let a = HashingEmbedder::with_seed(32, 1);
        let b = HashingEmbedder::with_seed(32, 2);
        assert_ne!(a.identity_label(), b.identity_label());
        assert!(a.identity_label().contains("dim=32"));
    }
}
