use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerator used for a zero match count at orders above one.
pub const BLEU_EPSILON: f64 = 1e-9;

/// Sufficient statistics for corpus BLEU. Adding examples is a commutative
/// sum over integer counts, so merged totals are order independent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub max_n: usize,
    /// Clipped n-gram matches per order (index 0 is unigrams).
    pub matches: Vec<u64>,
    /// Candidate n-gram counts per order.
    pub totals: Vec<u64>,
    pub candidate_len: u64,
    /// Sum of closest reference lengths.
    pub reference_len: u64,
}

impl BleuStats {
    pub fn new(max_n: usize) -> Result<Self> {
        if !(1..=4).contains(&max_n) {
            return Err(Error::arg(format!("bleu max_n must be in 1..=4, got {max_n}")));
        }
        Ok(Self {
            max_n,
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            candidate_len: 0,
            reference_len: 0,
        })
    }

    pub fn add<T: Eq + std::hash::Hash>(&mut self, candidate: &[T], references: &[Vec<T>]) {
        for n in 1..=self.max_n {
            let cand = ngram_counts(candidate, n);
            let mut max_ref: HashMap<&[T], u64> = HashMap::new();
            for r in references {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in &cand {
                self.matches[n - 1] += (*c).min(max_ref.get(g).copied().unwrap_or(0));
                self.totals[n - 1] += c;
            }
        }
        let c = candidate.len() as u64;
        self.candidate_len += c;
        // closest reference length, shorter wins ties
        if let Some(r) = references
            .iter()
            .map(|r| r.len() as u64)
            .min_by_key(|&r| (r.abs_diff(c), r))
        {
            self.reference_len += r;
        }
    }

    pub fn merge(&mut self, other: &BleuStats) {
        assert_eq!(self.max_n, other.max_n, "merging BLEU stats of different orders");
        for n in 0..self.max_n {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    pub fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        if c == 0.0 {
            0.0
        } else if c < r {
            (1.0 - r / c).exp()
        } else {
            1.0
        }
    }

    /// Geometric mean of clipped precisions times the brevity penalty.
    ///
    /// Orders for which the corpus has no candidate n-grams at all are left
    /// out of the mean.
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..self.max_n {
            if self.totals[n] == 0 {
                continue;
            }
            let num = if self.matches[n] == 0 {
                BLEU_EPSILON
            } else {
                self.matches[n] as f64
            };
            log_sum += (num / self.totals[n] as f64).ln();
            orders += 1;
        }
        self.brevity_penalty() * (log_sum / orders as f64).exp()
    }
}

fn ngram_counts<T: Eq + std::hash::Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Corpus-level BLEU with native multi-reference clipping.
pub fn bleu<T: Eq + std::hash::Hash>(
    candidates: &[Vec<T>],
    references: &[Vec<Vec<T>>],
    max_n: usize,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::arg("bleu over an empty corpus"));
    }
    if candidates.len() != references.len() {
        return Err(Error::arg(format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    let mut stats = BleuStats::new(max_n)?;
    for (c, refs) in candidates.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::arg("candidate without references"));
        }
        stats.add(c, refs);
    }
    Ok(stats.score())
}
