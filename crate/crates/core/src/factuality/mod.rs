//! NLI-based factuality (N-P) and correctness (N-A) evaluation.
//!
//! N-P: the generated answer is the hypothesis, each input passage a
//! premise; the answer is factual if at least one passage entails it.
//! N-A: the answer is correct if it and the gold answer entail each other.
//!
//! Inference goes through [`NliBackend`]; [`HttpNliClient`] talks to a
//! remote `/nli` endpoint and [`VerdictCache`] serves stored verdicts so
//! evaluation can run fully offline.

mod agreement;
mod cache;
mod judge;
mod nli;

pub use agreement::{human_agreement, load_annotations, Agreement, HumanAnnotation};
pub use cache::{verdict_key, CacheEntry, CachedNli, VerdictCache};
pub use judge::{
    corpus_rates, evaluate_factuality, na_judge, np_judge, np_judge_with, split_sentences,
    ExampleVerdict, FactualityConfig, FactualityInput, FactualityReport, NaJudgement, NpJudgement,
    PremiseMode,
};
pub use nli::{HttpNliClient, NliBackend, NliLabel, NliRequest, NliResponse, NliVerdict};
