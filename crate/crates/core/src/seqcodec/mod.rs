//! The source/target string grammar.
//!
//! Source: `<style> </s> q: <question> </s> p0: <text> </s> p1: <text> </s> ...`
//!
//! Target: `p<i>: p<j>: ... <answer>`, a ranking segment of passage index
//! tokens followed by the answer text.
//!
//! Passage indices always refer to positions in the encoded source, after
//! any reranking or truncation.

mod parse;
mod source;
mod target;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use parse::{parse_generated, Diagnostic, ParsedGeneration};
pub use source::{decode_source, encode_source, segments, DecodedSource, Markup, SourceSequence};
pub use target::{check_permutation, complete_ranking, encode_target, roundtrip_check, roundtrip_check_with, TargetSequence};

use crate::error::{Error, Result};

/// Separator between source segments.
pub const SEP: &str = "</s>";

/// Opening and closing marks for answer-span mode.
pub const SPAN_OPEN: &str = "<a>";
pub const SPAN_CLOSE: &str = "</a>";

/// Answer style control token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleTag {
    Extract,
    Conv,
}

impl StyleTag {
    pub fn token(self) -> &'static str {
        match self {
            StyleTag::Extract => "s:extract",
            StyleTag::Conv => "s:conv",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "s:extract" => Some(StyleTag::Extract),
            "s:conv" => Some(StyleTag::Conv),
            _ => None,
        }
    }
}

impl fmt::Display for StyleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StyleTag::Extract => "extract",
            StyleTag::Conv => "conv",
        })
    }
}

impl FromStr for StyleTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extract" | "s:extract" => Ok(StyleTag::Extract),
            "conv" | "s:conv" => Ok(StyleTag::Conv),
            other => Err(Error::arg(format!("unknown style `{other}`"))),
        }
    }
}

/// `"p<i>:"` for passage index `i`.
pub fn index_token(i: usize) -> String {
    format!("p{i}:")
}

/// Index carried by a canonical `p<digits>:` token. Leading zeros are not
/// canonical. Indices too large for `usize` come back as `usize::MAX`.
pub(crate) fn parse_index_token(token: &str) -> Option<usize> {
    let digits = token.strip_prefix('p')?.strip_suffix(':')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    Some(digits.parse().unwrap_or(usize::MAX))
}
