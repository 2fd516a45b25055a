//! Non-model machinery for generative reading comprehension: dataset
//! loading, source/target sequence codec, mixed-style corpora, passage
//! ranking, answer metrics, NLI-based factuality evaluation and a client for
//! an external generation service.

pub mod dataset;
pub mod error;
pub mod factuality;
pub mod inference;
pub mod metrics;
pub mod mst;
pub mod pipeline;
pub mod ranking;
pub mod retry;
pub mod seqcodec;
pub mod text;

pub use error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("genqa ", env!("CARGO_PKG_VERSION"));
