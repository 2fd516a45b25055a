use serde::{Deserialize, Serialize};

use super::porter;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorParams {
    /// Precision/recall balance in the harmonic mean.
    pub alpha: f64,
    /// Fragmentation penalty exponent.
    pub beta: f64,
    /// Maximum fragmentation penalty.
    pub gamma: f64,
    /// Run the Porter-stem matching stage after exact matching.
    #[serde(default = "yes")]
    pub stem: bool,
}

fn yes() -> bool {
    true
}

impl Default for MeteorParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
            stem: true,
        }
    }
}

/// Unigram alignment between candidate and reference positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// (candidate index, reference index), sorted by candidate index.
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    /// Runs of matches contiguous in both candidate and reference.
    pub fn chunks(&self) -> usize {
        let mut chunks = 0;
        let mut prev: Option<(usize, usize)> = None;
        for &(c, r) in &self.pairs {
            match prev {
                Some((pc, pr)) if c == pc + 1 && r == pr + 1 => {}
                _ => chunks += 1,
            }
            prev = Some((c, r));
        }
        chunks
    }
}

/// Staged greedy alignment: exact forms first, then Porter stems over what
/// is left. Within a stage each candidate token takes the reference position
/// right after its predecessor's match when that is available, otherwise the
/// leftmost free match.
pub fn align(candidate: &[String], reference: &[String], stem: bool) -> Alignment {
    let mut cand_used = vec![None::<usize>; candidate.len()];
    let mut ref_used = vec![false; reference.len()];

    let mut stage = |key: &dyn Fn(&str) -> String| {
        let ref_keys: Vec<String> = reference.iter().map(|t| key(t)).collect();
        for i in 0..candidate.len() {
            if cand_used[i].is_some() {
                continue;
            }
            let k = key(&candidate[i]);
            let free = |j: usize| !ref_used[j] && ref_keys[j] == k;
            let adjacent = i
                .checked_sub(1)
                .and_then(|p| cand_used[p])
                .map(|pr| pr + 1)
                .filter(|&j| j < reference.len() && free(j));
            if let Some(j) = adjacent.or_else(|| (0..reference.len()).find(|&j| free(j))) {
                cand_used[i] = Some(j);
                ref_used[j] = true;
            }
        }
    };
    stage(&|t: &str| t.to_string());
    if stem {
        stage(&porter::stem);
    }

    Alignment {
        pairs: cand_used
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
            .collect(),
    }
}

pub fn meteor_single(candidate: &[String], reference: &[String], params: &MeteorParams) -> f64 {
    let alignment = align(candidate, reference, params.stem);
    let m = alignment.pairs.len();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
    let frag = alignment.chunks() as f64 / m as f64;
    let penalty = params.gamma * frag.powf(params.beta);
    fmean * (1.0 - penalty)
}

/// METEOR without paraphrase or synonym stages, maximized over references.
/// Returns 0 for an empty reference list.
pub fn meteor(candidate: &[String], references: &[Vec<String>], params: &MeteorParams) -> f64 {
    references
        .iter()
        .map(|r| meteor_single(candidate, r, params))
        .fold(0.0, f64::max)
}
