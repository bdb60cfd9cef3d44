//! Iterative retrieval-generation synergy for open-domain question answering.
//!
//! Each question runs for a fixed number of iterations. An iteration first
//! expands the retrieval query with the document generated in the previous
//! iteration, retrieves the top-k paragraphs from a dense index, and then asks
//! a completion backend to write a new document from them (either refreshing
//! from all retrieved paragraphs or refining the previous document with the
//! newly retrieved ones). An answer is extracted at every iteration so that
//! exact match and answer recall can be tracked over the loop.
//!
//! Modules:
//! - [`corpus`]: paragraph corpus ingestion and lookup.
//! - [`retriever`]: embedders, the exact cosine index, and index persistence.
//! - [`generator`]: prompt templates, completion backends, and mocks.
//! - [`orchestrator`]: the iterative loop and single-step baselines.
//! - [`eval`]: answer normalization, metrics, sampling, and reports.
//! - [`cli`]: configuration and the `index` / `run` / `report` commands.

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod generator;
pub mod orchestrator;
pub mod retriever;

mod http;

pub use http::EndpointConfig;

pub use corpus::{Corpus, Document};
pub use eval::{EvalReport, QaExample};
pub use generator::{CompletionBackend, DecodingParams};
pub use orchestrator::{ItrgConfig, ItrgTrace, IterationState, Pipeline, RagStrategy};
pub use retriever::{DenseIndex, Embedder, EmbeddingVector, RetrievalResult};
