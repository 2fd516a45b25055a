use serde::{Deserialize, Serialize};

use super::parse_index_token;
use crate::text::is_no_answer;

/// Malformation found while parsing generated text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    DuplicateIndex,
    MissingIndex,
    OutOfRange,
    EmptyAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedGeneration {
    pub ranking: Vec<usize>,
    pub answer: String,
    pub is_no_answer: bool,
    /// Each code at most once, in order of first occurrence.
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedGeneration {
    pub fn is_well_formed(&self) -> bool {
        self.diagnostics.is_empty()
    }

    fn flag(&mut self, d: Diagnostic) {
        if !self.diagnostics.contains(&d) {
            self.diagnostics.push(d);
        }
    }
}

/// Splits raw model output into ranking and answer. Never fails.
///
/// The ranking is the leading run of `p<digits>:` tokens, cut after the last
/// token whose index is below `n_passages`. Anything after that point,
/// including trailing out-of-range tokens, is answer text. Inside the ranking,
/// repeats keep their first occurrence and out-of-range indices are dropped.
/// A non-empty ranking that does not cover every passage is reported as
/// [`Diagnostic::MissingIndex`] but is not completed here; see
/// [`super::complete_ranking`].
pub fn parse_generated(raw: &str, n_passages: usize) -> ParsedGeneration {
    let n_passages = n_passages.max(1);

    // (byte offset, index) of each token in the leading run
    let mut run: Vec<(usize, usize)> = Vec::new();
    let mut rest_at = raw.len();
    let mut pos = 0;
    while pos < raw.len() {
        let tail = &raw[pos..];
        let skip = tail.len() - tail.trim_start().len();
        let start = pos + skip;
        if start >= raw.len() {
            break;
        }
        let end = raw[start..]
            .find(char::is_whitespace)
            .map_or(raw.len(), |e| start + e);
        match parse_index_token(&raw[start..end]) {
            Some(idx) => {
                run.push((start, idx));
                pos = end;
            }
            None => {
                rest_at = start;
                break;
            }
        }
    }

    let cut = run.iter().rposition(|&(_, idx)| idx < n_passages);
    let answer_from = match cut {
        Some(c) if c + 1 < run.len() => run[c + 1].0,
        Some(_) => rest_at,
        None => run.first().map_or(rest_at, |&(off, _)| off),
    };

    let mut out = ParsedGeneration {
        ranking: Vec::new(),
        answer: raw[answer_from..].trim().to_string(),
        is_no_answer: false,
        diagnostics: Vec::new(),
    };

    let kept = &run[..cut.map_or(0, |c| c + 1)];
    let bound = kept.iter().map(|&(_, i)| i).filter(|&i| i < n_passages).max().map_or(0, |m| m + 1);
    let mut seen = vec![false; bound];
    for &(_, idx) in kept {
        if idx >= n_passages {
            out.flag(Diagnostic::OutOfRange);
        } else if seen[idx] {
            out.flag(Diagnostic::DuplicateIndex);
        } else {
            seen[idx] = true;
            out.ranking.push(idx);
        }
    }
    if !out.ranking.is_empty() && out.ranking.len() < n_passages {
        out.flag(Diagnostic::MissingIndex);
    }
    if out.answer.is_empty() {
        out.flag(Diagnostic::EmptyAnswer);
    }
    out.is_no_answer = is_no_answer(&out.answer);
    out
}
