use std::cmp::Ordering;

use rayon::prelude::*;

use super::{
    cosine_from_parts, dot, l2_norm, Embedder, EmbeddingVector, RetrievalResult, RetrieverError,
    ScoredDoc, SearchBackend,
};
use crate::corpus::Corpus;

const EMBED_BATCH: usize = 32;

/// Document embeddings stored row-major, positionally aligned with `doc_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    dim: usize,
    embedder_label: String,
    doc_ids: Vec<String>,
    vectors: Vec<f64>,
    norms: Vec<f64>,
}

impl DenseIndex {
    /// Assembles an index from already computed vectors.
    pub fn from_vectors(
        embedder_label: impl Into<String>,
        doc_ids: Vec<String>,
        vectors: Vec<EmbeddingVector>,
    ) -> Result<Self, RetrieverError> {
        if doc_ids.is_empty() {
            return Err(RetrieverError::EmptyCorpus);
        }
        if doc_ids.len() != vectors.len() {
            return Err(RetrieverError::Format(format!(
                "{} ids but {} vectors",
                doc_ids.len(),
                vectors.len()
            )));
        }
        let dim = vectors[0].dim();
        let mut flat = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            if v.dim() != dim {
                return Err(RetrieverError::DimensionMismatch {
                    expected: dim,
                    actual: v.dim(),
                });
            }
            flat.extend(v.into_values());
        }
        Self::from_raw(embedder_label.into(), dim, doc_ids, flat)
    }

    pub(crate) fn from_raw(
        embedder_label: String,
        dim: usize,
        doc_ids: Vec<String>,
        vectors: Vec<f64>,
    ) -> Result<Self, RetrieverError> {
        debug_assert_eq!(vectors.len(), dim * doc_ids.len());
        let norms: Vec<f64> = vectors.chunks_exact(dim).map(l2_norm).collect();
        if norms.iter().any(|&n| n == 0.0 || !n.is_finite()) {
            return Err(RetrieverError::ZeroNorm);
        }
        Ok(Self {
            dim,
            embedder_label,
            doc_ids,
            vectors,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn embedder_label(&self) -> &str {
        &self.embedder_label
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn raw_vectors(&self) -> &[f64] {
        &self.vectors
    }

    /// Exact scan: the `min(k, n)` highest-cosine documents for `query`,
    /// ordered by score descending and then doc id ascending.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<RetrievalResult, RetrieverError> {
        if k == 0 {
            return Err(RetrieverError::ZeroK);
        }
        if query.dim() != self.dim {
            return Err(RetrieverError::DimensionMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        let q = query.values();
        let qn = query.norm();
        if qn == 0.0 {
            return Err(RetrieverError::ZeroNorm);
        }

        let mut scored: Vec<(f64, usize)> = self
            .vectors
            .chunks_exact(self.dim)
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (row, &n))| (cosine_from_parts(dot(q, row), qn, n), i))
            .collect();

        let ids = &self.doc_ids;
        let rank = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            b.0.total_cmp(&a.0).then_with(|| ids[a.1].cmp(&ids[b.1]))
        };
        let take = k.min(scored.len());
        if take < scored.len() {
            scored.select_nth_unstable_by(take - 1, rank);
            scored.truncate(take);
        }
        scored.sort_unstable_by(rank);

        Ok(RetrievalResult {
            k,
            backend: SearchBackend::Exact,
            entries: scored
                .into_iter()
                .map(|(score, i)| ScoredDoc {
                    doc_id: ids[i].clone(),
                    score,
                })
                .collect(),
        })
    }
}

/// Embeds every corpus document with `embedder`, in corpus order.
pub fn build_index(corpus: &Corpus, embedder: &dyn Embedder) -> Result<DenseIndex, RetrieverError> {
    if corpus.is_empty() {
        return Err(RetrieverError::EmptyCorpus);
    }
    let docs = corpus.documents();
    let batches: Vec<Vec<EmbeddingVector>> = docs
        .par_chunks(EMBED_BATCH)
        .map(|chunk| {
            let texts: Vec<&str> = chunk.iter().map(|d| d.text.as_str()).collect();
            match embedder.embed_batch(&texts) {
                Ok(vs) => Ok(vs),
                // Re-embed one by one to name the failing document.
                Err(batch_err) => {
                    for d in chunk {
                        if let Err(source) = embedder.embed(&d.text) {
                            return Err(RetrieverError::EmbedDocument {
                                doc_id: d.id.clone(),
                                source,
                            });
                        }
                    }
                    Err(RetrieverError::EmbedDocument {
                        doc_id: chunk[0].id.clone(),
                        source: batch_err,
                    })
                }
            }
        })
        .collect::<Result<_, _>>()?;

    let mut flat = Vec::with_capacity(docs.len() * embedder.dim());
    for (doc, v) in docs.iter().zip(batches.into_iter().flatten()) {
        if v.dim() != embedder.dim() {
            return Err(RetrieverError::EmbedDocument {
                doc_id: doc.id.clone(),
                source: RetrieverError::DimensionMismatch {
                    expected: embedder.dim(),
                    actual: v.dim(),
                }
                .into(),
            });
        }
        flat.extend(v.into_values());
    }
    DenseIndex::from_raw(
        embedder.identity_label().to_string(),
        embedder.dim(),
        docs.iter().map(|d| d.id.clone()).collect(),
        flat,
    )
}

/// Embeds `query_text` with the index's embedder and runs an exact search.
pub fn retrieve_top_k(
    index: &DenseIndex,
    embedder: &dyn Embedder,
    query_text: &str,
    k: usize,
) -> Result<RetrievalResult, RetrieverError> {
    if embedder.identity_label() != index.embedder_label() {
        return Err(RetrieverError::LabelMismatch {
            index: index.embedder_label().to_string(),
            embedder: embedder.identity_label().to_string(),
        });
    }
    if query_text.trim().is_empty() {
        return Err(RetrieverError::EmptyQuery);
    }
    if k == 0 {
        return Err(RetrieverError::ZeroK);
    }
    let q = embedder.embed(query_text).map_err(RetrieverError::EmbedQuery)?;
    index.search(&q, k)
}
