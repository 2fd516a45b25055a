use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::nli::{NliBackend, NliLabel, NliVerdict};
use crate::error::{Error, Result};

/// What counts as one premise on the passage side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiseMode {
    /// Each full passage is a premise.
    #[default]
    Passage,
    /// Each sentence of each passage is a premise.
    Sentence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpJudgement {
    /// Entailed by at least one premise.
    pub factual: bool,
    pub per_premise: Vec<NliVerdict>,
    /// Entailed by one premise and contradicted by another.
    pub conflicting: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaJudgement {
    /// Both directions entail.
    pub correct: bool,
    /// premise = gold, hypothesis = generated.
    pub forward: NliVerdict,
    /// premise = generated, hypothesis = gold.
    pub backward: NliVerdict,
}

/// Splits on `.`, `!` or `?` followed by whitespace.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if let (true, Some(&(j, next))) = (matches!(c, '.' | '!' | '?'), chars.peek()) {
            if next.is_whitespace() {
                out.push(&text[start..j]);
                start = j;
            }
        }
    }
    out.push(&text[start..]);
    out.into_iter().map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// NLI on passage: premise = passage, hypothesis = answer.
pub fn np_judge(answer: &str, passages: &[String], nli: &dyn NliBackend) -> Result<NpJudgement> {
    np_judge_with(answer, passages, nli, PremiseMode::Passage)
}

pub fn np_judge_with(
    answer: &str,
    passages: &[String],
    nli: &dyn NliBackend,
    mode: PremiseMode,
) -> Result<NpJudgement> {
    if passages.is_empty() {
        return Err(Error::arg("np_judge needs at least one passage"));
    }
    if answer.trim().is_empty() {
        return Err(Error::arg("np_judge needs a non-empty answer"));
    }
    let premises: Vec<&str> = match mode {
        PremiseMode::Passage => passages.iter().map(String::as_str).collect(),
        PremiseMode::Sentence => passages.iter().flat_map(|p| split_sentences(p)).collect(),
    };
    let per_premise = premises
        .iter()
        .map(|p| nli.infer(p, answer))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let factual = per_premise.iter().any(NliVerdict::is_entail);
    let conflicting = factual && per_premise.iter().any(|v| v.label == NliLabel::Contradict);
    Ok(NpJudgement {
        factual,
        per_premise,
        conflicting,
    })
}

/// NLI on answer: entailment must hold in both directions.
pub fn na_judge(generated: &str, gold: &str, nli: &dyn NliBackend) -> Result<NaJudgement> {
    if generated.trim().is_empty() || gold.trim().is_empty() {
        return Err(Error::arg("na_judge needs non-empty generated and gold answers"));
    }
    let forward = nli.infer(gold, generated)?;
    let backward = nli.infer(generated, gold)?;
    Ok(NaJudgement {
        correct: forward.is_entail() && backward.is_entail(),
        forward,
        backward,
    })
}

/// Everything needed to judge one generated answer.
#[derive(Debug, Clone, PartialEq)]
pub struct FactualityInput {
    pub query_id: String,
    pub generated: String,
    /// Passages the model saw.
    pub passages: Vec<String>,
    pub gold_answers: Vec<String>,
    pub predicted_no_answer: bool,
    pub gold_answerable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleVerdict {
    pub query_id: String,
    pub factual: bool,
    pub correct: bool,
    pub np_labels: Vec<NliLabel>,
    /// (forward, backward) per gold answer tried, stopping at the first correct one.
    pub na_labels: Vec<(NliLabel, NliLabel)>,
    pub conflicting: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactualityReport {
    /// Percentage entailed by at least one passage; absent for an empty corpus.
    pub n_p_rate: Option<f64>,
    /// Percentage with bidirectional answer entailment; absent for an empty corpus.
    pub n_a_rate: Option<f64>,
    pub n_examples: usize,
    /// Sorted by query id.
    pub per_example: Vec<ExampleVerdict>,
    /// Inputs left out because the prediction or the gold is unanswerable.
    #[serde(default)]
    pub n_excluded: usize,
}

/// Aggregates per-example verdicts into corpus rates.
pub fn corpus_rates(verdicts: &[ExampleVerdict]) -> FactualityReport {
    let n = verdicts.len();
    let rate = |count: usize| (n > 0).then(|| 100.0 * count as f64 / n as f64);
    let mut per_example = verdicts.to_vec();
    per_example.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    FactualityReport {
        n_p_rate: rate(verdicts.iter().filter(|v| v.factual).count()),
        n_a_rate: rate(verdicts.iter().filter(|v| v.correct).count()),
        n_examples: n,
        per_example,
        n_excluded: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactualityConfig {
    pub premise_mode: PremiseMode,
    /// Examples judged concurrently.
    pub max_in_flight: usize,
}

impl Default for FactualityConfig {
    fn default() -> Self {
        Self {
            premise_mode: PremiseMode::Passage,
            max_in_flight: 4,
        }
    }
}

fn judge_one(input: &FactualityInput, nli: &dyn NliBackend, mode: PremiseMode) -> Result<ExampleVerdict> {
    let wrap = |e: Error| match e {
        Error::Backend(source) => Error::Evaluation {
            query_id: input.query_id.clone(),
            source,
        },
        other => other,
    };
    let np = np_judge_with(&input.generated, &input.passages, nli, mode).map_err(wrap)?;
    let mut na_labels = Vec::new();
    let mut correct = false;
    for gold in input.gold_answers.iter().filter(|g| !g.trim().is_empty()) {
        let na = na_judge(&input.generated, gold, nli).map_err(wrap)?;
        na_labels.push((na.forward.label, na.backward.label));
        if na.correct {
            correct = true;
            break;
        }
    }
    if np.conflicting {
        tracing::info!(query_id = %input.query_id, "answer entailed by one passage and contradicted by another");
    }
    Ok(ExampleVerdict {
        query_id: input.query_id.clone(),
        factual: np.factual,
        correct,
        np_labels: np.per_premise.iter().map(|v| v.label).collect(),
        na_labels,
        conflicting: np.conflicting,
    })
}

/// Judges every eligible input and aggregates the rates.
///
/// No-answer predictions and unanswerable gold examples are excluded. Up to
/// `max_in_flight` examples are judged at once; the report is ordered by
/// query id regardless. When several examples fail, the error of the
/// earliest input is returned.
pub fn evaluate_factuality(
    inputs: &[FactualityInput],
    nli: &dyn NliBackend,
    cfg: &FactualityConfig,
) -> Result<FactualityReport> {
    let eligible: Vec<&FactualityInput> = inputs
        .iter()
        .filter(|i| !i.predicted_no_answer && i.gold_answerable && !i.generated.trim().is_empty())
        .collect();
    let excluded = inputs.len() - eligible.len();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ExampleVerdict>>>> =
        Mutex::new((0..eligible.len()).map(|_| None).collect());
    let workers = cfg.max_in_flight.clamp(1, eligible.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(input) = eligible.get(i) else { break };
                let r = judge_one(input, nli, cfg.premise_mode);
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });

    let verdicts = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every slot judged"))
        .collect::<Result<Vec<_>>>()?;
    let mut report = corpus_rates(&verdicts);
    report.n_excluded = excluded;
    Ok(report)
}
