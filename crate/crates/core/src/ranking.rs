//! Reranker-driven passage arrangement and ranking quality.
//!
//! Reranker scores are supplied from outside (a JSON Lines scores file); this
//! module only orders, truncates and evaluates.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Passage, QaExample};
use crate::error::{Error, Result};

/// Largest `top_n` accepted for ranked-N arrangements.
pub const MAX_TOP_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingScores {
    pub query_id: String,
    /// One score per dataset passage, higher is more relevant.
    pub scores: Vec<f64>,
}

/// How passages reach the source and what ranking the target carries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RankedConfig {
    /// Top-N passages by score, re-indexed; target ranking is the identity.
    RankedN { top_n: usize },
    /// Dataset order in the source; target ranking is the identity.
    NoRanking,
    /// Dataset order in the source; target ranking sorts by score.
    #[default]
    EndToEnd,
}

impl RankedConfig {
    pub fn validate(&self) -> Result<()> {
        if let RankedConfig::RankedN { top_n } = *self {
            if !(1..=MAX_TOP_N).contains(&top_n) {
                return Err(Error::arg(format!(
                    "top_n must be in 1..={MAX_TOP_N}, got {top_n}"
                )));
            }
        }
        Ok(())
    }

    pub fn needs_scores(&self) -> bool {
        !matches!(self, RankedConfig::NoRanking)
    }

    /// Builds a config from the CLI mode name and optional N.
    pub fn from_parts(mode: &str, top_n: Option<usize>) -> Result<Self> {
        let cfg = match (mode, top_n) {
            ("ranked_n", Some(n)) => RankedConfig::RankedN { top_n: n },
            ("ranked_n", None) => return Err(Error::arg("ranked_n requires --top-n")),
            ("no_ranking", None) => RankedConfig::NoRanking,
            ("end_to_end", None) => RankedConfig::EndToEnd,
            ("no_ranking" | "end_to_end", Some(_)) => {
                return Err(Error::arg("--top-n only applies to ranked_n"))
            }
            (other, _) => return Err(Error::arg(format!("unknown ranking mode `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Passages as they enter the source, plus the target ranking over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrangement {
    /// Re-indexed `0..n` in source order.
    pub passages: Vec<Passage>,
    /// Dataset position of each source passage.
    pub dataset_positions: Vec<usize>,
    /// Permutation of source indices for the target ranking segment.
    pub target_ranking: Vec<usize>,
}

impl Arrangement {
    /// Source indices of gold passages.
    pub fn gold(&self) -> Vec<usize> {
        self.passages
            .iter()
            .filter(|p| p.is_selected)
            .map(|p| p.index)
            .collect()
    }

    pub fn texts(&self) -> Vec<String> {
        self.passages.iter().map(|p| p.text.clone()).collect()
    }
}

/// Indices sorted by descending score; ties keep ascending position.
pub fn argsort_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

pub fn apply_config(
    example: &QaExample,
    scores: Option<&RankingScores>,
    config: RankedConfig,
) -> Result<Arrangement> {
    config.validate()?;
    let n = example.passages.len();
    let scores = match (config.needs_scores(), scores) {
        (true, None) => {
            return Err(Error::arg(format!(
                "no reranker scores for query {}",
                example.query_id
            )))
        }
        (true, Some(s)) => {
            if s.scores.len() != n {
                return Err(Error::arg(format!(
                    "query {}: {} scores for {n} passages",
                    example.query_id,
                    s.scores.len()
                )));
            }
            if let Some(bad) = s.scores.iter().find(|v| !v.is_finite()) {
                return Err(Error::arg(format!(
                    "query {}: non-finite score {bad}",
                    example.query_id
                )));
            }
            Some(&s.scores)
        }
        (false, _) => None,
    };

    let (order, target_ranking) = match (config, scores) {
        (RankedConfig::RankedN { top_n }, Some(s)) => {
            let mut order = argsort_desc(s);
            order.truncate(top_n.min(n));
            let k = order.len();
            (order, (0..k).collect())
        }
        (RankedConfig::EndToEnd, Some(s)) => ((0..n).collect(), argsort_desc(s)),
        _ => ((0..n).collect(), (0..n).collect()),
    };

    let passages = order
        .iter()
        .enumerate()
        .map(|(new, &old)| Passage {
            index: new,
            ..example.passages[old].clone()
        })
        .collect();
    Ok(Arrangement {
        passages,
        dataset_positions: order,
        target_ranking,
    })
}

/// Fraction of examples whose gold passage appears in the first `k` ranked
/// positions. Examples without gold passages are left out of the
/// denominator; `None` when no example counts.
pub fn top_k_accuracy(rankings: &[(Vec<usize>, Vec<usize>)], k: usize) -> Result<Option<f64>> {
    if k < 1 {
        return Err(Error::arg("k must be at least 1"));
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for (ranking, gold) in rankings {
        if gold.is_empty() {
            continue;
        }
        total += 1;
        if ranking.iter().take(k).any(|i| gold.contains(i)) {
            hits += 1;
        }
    }
    Ok((total > 0).then(|| hits as f64 / total as f64))
}

/// Mean reciprocal rank of the first gold passage; a miss contributes 0.
pub fn mean_reciprocal_rank(rankings: &[(Vec<usize>, Vec<usize>)]) -> Option<f64> {
    let rr: Vec<f64> = rankings
        .iter()
        .filter(|(_, gold)| !gold.is_empty())
        .map(|(ranking, gold)| {
            ranking
                .iter()
                .position(|i| gold.contains(i))
                .map_or(0.0, |p| 1.0 / (p + 1) as f64)
        })
        .collect();
    (!rr.is_empty()).then(|| rr.iter().sum::<f64>() / rr.len() as f64)
}

/// Kendall tau between two permutations of `0..n`.
///
/// Counts discordant pairs as inversions via merge sort. Defined as 1.0 for
/// fewer than two items.
pub fn ranking_agreement(predicted: &[usize], reference: &[usize]) -> Result<f64> {
    if predicted.len() != reference.len() {
        return Err(Error::arg(format!(
            "ranking lengths differ: {} vs {}",
            predicted.len(),
            reference.len()
        )));
    }
    crate::seqcodec::check_permutation(predicted)?;
    crate::seqcodec::check_permutation(reference)?;
    let n = predicted.len();
    if n < 2 {
        return Ok(1.0);
    }
    let mut ref_pos = vec![0usize; n];
    for (pos, &item) in reference.iter().enumerate() {
        ref_pos[item] = pos;
    }
    let mut seq: Vec<usize> = predicted.iter().map(|&i| ref_pos[i]).collect();
    let inversions = count_inversions(&mut seq);
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(1.0 - 2.0 * inversions as f64 / pairs)
}

fn count_inversions(v: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            inv += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    inv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingQualityReport {
    pub top_k_accuracy: BTreeMap<usize, f64>,
    pub mean_reciprocal_rank: Option<f64>,
    pub kendall_tau: Option<f64>,
    pub n_examples: usize,
}

/// Cutoffs reported by [`RankingQualityReport`].
pub const REPORT_CUTOFFS: [usize; 4] = [1, 3, 5, 10];

impl RankingQualityReport {
    /// `rankings` pairs each predicted ranking with its gold indices;
    /// `taus` holds per-example agreement with a reference ranking, if any.
    pub fn build(rankings: &[(Vec<usize>, Vec<usize>)], taus: &[f64]) -> Self {
        let mut top_k = BTreeMap::new();
        for k in REPORT_CUTOFFS {
            if let Ok(Some(acc)) = top_k_accuracy(rankings, k) {
                top_k.insert(k, acc);
            }
        }
        Self {
            top_k_accuracy: top_k,
            mean_reciprocal_rank: mean_reciprocal_rank(rankings),
            kendall_tau: (!taus.is_empty()).then(|| taus.iter().sum::<f64>() / taus.len() as f64),
            n_examples: rankings.len(),
        }
    }
}

/// Reads a JSON Lines scores file keyed by query id.
pub fn load_scores(path: &Path) -> Result<HashMap<String, RankingScores>> {
    let file = File::open(path).map_err(|e| Error::input(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RankingScores = serde_json::from_str(&line)
            .map_err(|e| Error::record(path, i + 1, "<record>", e.to_string()))?;
        if rec.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::record(path, i + 1, "scores", "non-finite score"));
        }
        out.insert(rec.query_id.clone(), rec);
    }
    Ok(out)
}

/// Source of passage arrangements for corpus building and generation.
pub trait RankingProvider {
    fn arrange(&self, example: &QaExample) -> Result<Arrangement>;
}

/// Arranges passages from a table of precomputed reranker scores.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    pub config: RankedConfig,
    pub scores: HashMap<String, RankingScores>,
}

impl ScoreTable {
    pub fn new(config: RankedConfig, scores: HashMap<String, RankingScores>) -> Self {
        Self { config, scores }
    }

    /// Dataset order with identity rankings; needs no scores.
    pub fn unranked() -> Self {
        Self::new(RankedConfig::NoRanking, HashMap::new())
    }
}

impl RankingProvider for ScoreTable {
    fn arrange(&self, example: &QaExample) -> Result<Arrangement> {
        apply_config(example, self.scores.get(&example.query_id), self.config)
    }
}
