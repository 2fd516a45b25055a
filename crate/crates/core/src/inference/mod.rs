//! Batch client for an external generation service.
//!
//! Requests carry encoded source sequences; raw generations are cached on
//! disk keyed by (source, backend id) and parsed with
//! [`parse_generated`](crate::seqcodec::parse_generated).

mod batch;
mod cache;
mod http;
mod predictions;

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Result};
use crate::seqcodec::{decode_source, ParsedGeneration, StyleTag};

pub use batch::{generate_batch, BatchOptions, PartialBatch};
pub use cache::{generation_key, CachedGeneration, GenerationCache, GenerationCacheEntry};
pub use http::{GenerateRequest, GenerateResponse, HttpGenerationClient};
pub use predictions::{load_predictions, write_predictions, LoadedPredictions, PredictionLine};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub query_id: String,
    pub source: String,
    pub max_new_tokens: usize,
    pub style: StyleTag,
}

impl GenerationRequest {
    /// Builds a request, taking the style from the source's leading token.
    pub fn new(query_id: impl Into<String>, source: impl Into<String>, max_new_tokens: usize) -> Result<Self> {
        let source = source.into();
        let decoded = decode_source(&source)?;
        Ok(Self {
            query_id: query_id.into(),
            source,
            max_new_tokens,
            style: decoded.style,
        })
    }

    /// Passage count of the encoded source, needed to parse the generation.
    pub fn n_passages(&self) -> Result<usize> {
        Ok(decode_source(&self.source)?.passages.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub query_id: String,
    pub raw: String,
    pub parsed: ParsedGeneration,
    pub backend_id: String,
    pub latency_ms: u64,
}

/// A text generation model behind some transport.
pub trait GenerationBackend: Send + Sync {
    /// Identifies the model; part of the cache key.
    fn backend_id(&self) -> &str;

    /// One generation attempt. Retrying is the caller's job.
    fn generate(&self, source: &str, max_new_tokens: usize) -> std::result::Result<String, BackendError>;
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for &B {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn generate(&self, source: &str, max_new_tokens: usize) -> std::result::Result<String, BackendError> {
        (**self).generate(source, max_new_tokens)
    }
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for Box<B> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn generate(&self, source: &str, max_new_tokens: usize) -> std::result::Result<String, BackendError> {
        (**self).generate(source, max_new_tokens)
    }
}
