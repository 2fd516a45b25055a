use serde::{Deserialize, Serialize};

use super::{index_token, parse_generated};
use crate::error::{Error, Result};
use crate::text::is_no_answer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSequence {
    /// Permutation of source passage indices, most relevant first.
    pub ranking: Vec<usize>,
    pub answer: String,
    pub is_no_answer: bool,
}

impl TargetSequence {
    /// Builds a target, deriving `is_no_answer` from the answer text.
    pub fn new(ranking: Vec<usize>, answer: impl Into<String>) -> Self {
        let answer = answer.into();
        let is_no_answer = is_no_answer(&answer);
        Self {
            ranking,
            answer,
            is_no_answer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_permutation(&self.ranking)?;
        if self.answer.trim().is_empty() {
            return Err(Error::arg("target answer is empty"));
        }
        if self.answer.trim() != self.answer {
            return Err(Error::arg("target answer has surrounding whitespace"));
        }
        if self.is_no_answer != is_no_answer(&self.answer) {
            return Err(Error::arg(
                "is_no_answer must be set exactly when the answer is the no-answer marker",
            ));
        }
        Ok(())
    }
}

/// Ok iff `ranking` is a permutation of `0..ranking.len()`.
pub fn check_permutation(ranking: &[usize]) -> Result<()> {
    let mut seen = vec![false; ranking.len()];
    for &i in ranking {
        match seen.get_mut(i) {
            Some(s) if !*s => *s = true,
            Some(_) => return Err(Error::arg(format!("ranking repeats index {i}"))),
            None => {
                return Err(Error::arg(format!(
                    "ranking index {i} out of range for {} passages",
                    ranking.len()
                )))
            }
        }
    }
    Ok(())
}

/// Serializes `ranking` as `p<i>:` tokens followed by the answer.
pub fn encode_target(t: &TargetSequence) -> Result<String> {
    t.validate()?;
    let mut out = String::new();
    for &i in &t.ranking {
        out.push_str(&index_token(i));
        out.push(' ');
    }
    out.push_str(&t.answer);
    Ok(out)
}

/// True iff encoding then parsing reproduces `t` with no diagnostics, using
/// `n_passages = max(1, |ranking|)`.
pub fn roundtrip_check(t: &TargetSequence) -> bool {
    roundtrip_check_with(t, t.ranking.len().max(1))
}

pub fn roundtrip_check_with(t: &TargetSequence, n_passages: usize) -> bool {
    let Ok(encoded) = encode_target(t) else {
        return false;
    };
    let parsed = parse_generated(&encoded, n_passages);
    parsed.diagnostics.is_empty()
        && parsed.ranking == t.ranking
        && parsed.answer == t.answer
        && parsed.is_no_answer == t.is_no_answer
}

/// Appends indices missing from a partial ranking in source order, giving a
/// full permutation of `0..n_passages`. Out-of-range and repeated entries are
/// dropped.
pub fn complete_ranking(ranking: &[usize], n_passages: usize) -> Vec<usize> {
    let mut seen = vec![false; n_passages];
    let mut out = Vec::with_capacity(n_passages);
    for &i in ranking {
        if i < n_passages && !seen[i] {
            seen[i] = true;
            out.push(i);
        }
    }
    out.extend((0..n_passages).filter(|&i| !seen[i]));
    out
}
