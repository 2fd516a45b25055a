//! Answer-quality metrics: BLEU-n, ROUGE-L, METEOR and answerability F1.
//!
//! Multi-reference policy: BLEU clips against all references natively,
//! ROUGE-L and METEOR take the maximum over references. Examples whose gold
//! label is unanswerable only count towards answerability F1.

mod answerability;
mod bleu;
mod meteor;
pub mod porter;
mod rouge;
mod tokenize;

use serde::{Deserialize, Serialize};

pub use answerability::{answerability_f1, PrecisionRecall};
pub use bleu::{bleu, BleuStats, BLEU_EPSILON};
pub use meteor::{align, meteor, meteor_single, Alignment, MeteorParams};
pub use rouge::{lcs_len, rouge_l, rouge_l_single};
pub use tokenize::tokenize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub lowercase: bool,
    pub rouge_beta: f64,
    /// Highest BLEU order in the `b4` column.
    pub bleu_max_n: usize,
    pub meteor: MeteorParams,
    /// Reserved for a synonym matching stage; must stay false.
    pub meteor_synonyms: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            rouge_beta: 1.2,
            bleu_max_n: 4,
            meteor: MeteorParams::default(),
            meteor_synonyms: false,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rouge_beta.is_nan() || self.rouge_beta <= 0.0 {
            return Err(Error::arg("rouge_beta must be positive"));
        }
        if !(1..=4).contains(&self.bleu_max_n) {
            return Err(Error::arg("bleu_max_n must be in 1..=4"));
        }
        if self.meteor_synonyms {
            return Err(Error::arg("METEOR synonym stage is not available"));
        }
        let m = &self.meteor;
        if !(0.0..=1.0).contains(&m.alpha) || m.beta < 0.0 || !(0.0..=1.0).contains(&m.gamma) {
            return Err(Error::arg("METEOR parameters out of range"));
        }
        Ok(())
    }
}

/// One scored example.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricItem {
    pub candidate: String,
    pub references: Vec<String>,
    pub gold_answerable: bool,
    pub predicted_answerable: bool,
}

/// Corpus-level scores as percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub b1: Option<f64>,
    pub b4: Option<f64>,
    pub rouge_l: Option<f64>,
    pub meteor: Option<f64>,
    pub answerability_precision: f64,
    pub answerability_recall: f64,
    pub answerability_f1: f64,
    /// Examples considered (answerable and unanswerable).
    pub n_examples: usize,
    /// Examples scored by the text metrics.
    pub n_text_examples: usize,
}

/// Scores a corpus. ROUGE-L and METEOR are means of per-example scores;
/// BLEU is corpus-level.
pub fn score_corpus(items: &[MetricItem], cfg: &MetricConfig) -> Result<MetricReport> {
    cfg.validate()?;
    let mut b1 = BleuStats::new(1)?;
    let mut bn = BleuStats::new(cfg.bleu_max_n)?;
    let (mut rouge_sum, mut meteor_sum, mut n_text) = (0.0, 0.0, 0usize);

    for item in items.iter().filter(|i| i.gold_answerable) {
        if item.references.is_empty() {
            return Err(Error::arg("answerable example without references"));
        }
        let cand = tokenize(&item.candidate, cfg);
        let refs: Vec<Vec<String>> = item.references.iter().map(|r| tokenize(r, cfg)).collect();
        b1.add(&cand, &refs);
        bn.add(&cand, &refs);
        rouge_sum += rouge_l(&cand, &refs, cfg.rouge_beta)?;
        meteor_sum += meteor(&cand, &refs, &cfg.meteor);
        n_text += 1;
    }

    let predicted: Vec<bool> = items.iter().map(|i| i.predicted_answerable).collect();
    let gold: Vec<bool> = items.iter().map(|i| i.gold_answerable).collect();
    let pr = answerability_f1(&predicted, &gold)?;
    let pct = |v: f64| (n_text > 0).then_some(100.0 * v);

    Ok(MetricReport {
        b1: pct(b1.score()),
        b4: pct(bn.score()),
        rouge_l: pct(rouge_sum / n_text.max(1) as f64),
        meteor: pct(meteor_sum / n_text.max(1) as f64),
        answerability_precision: 100.0 * pr.precision,
        answerability_recall: 100.0 * pr.recall,
        answerability_f1: 100.0 * pr.f1,
        n_examples: items.len(),
        n_text_examples: n_text,
    })
}
