use serde::{Deserialize, Serialize};

use super::{index_token, StyleTag, SEP, SPAN_CLOSE, SPAN_OPEN};
use crate::error::{Error, Result};

/// Optional extractive-reader information carried into the source.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Markup {
    #[default]
    None,
    /// Wrap `start..end` (char offsets) of passage `passage` in `<a>`/`</a>`.
    AnswerSpan {
        passage: usize,
        start: usize,
        end: usize,
    },
    /// Replace the passage list with a single `p0:` holding the extracted answer.
    AnswerOnly(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSequence {
    pub style: StyleTag,
    pub question: String,
    /// Passage texts in source order; the position is the `p<i>:` index.
    pub passages: Vec<String>,
    #[serde(default)]
    pub markup: Markup,
}

impl SourceSequence {
    pub fn new(style: StyleTag, question: impl Into<String>, passages: Vec<String>) -> Self {
        Self {
            style,
            question: question.into(),
            passages,
            markup: Markup::None,
        }
    }

    pub fn with_markup(mut self, markup: Markup) -> Self {
        self.markup = markup;
        self
    }
}

fn reject_separator(field: &str, text: &str) -> Result<()> {
    if text.contains(SEP) {
        return Err(Error::arg(format!("{field} contains the separator `{SEP}`")));
    }
    Ok(())
}

/// Serializes a source sequence.
///
/// Plain and answer-span sources end with a trailing separator; answer-only
/// sources end after the extracted answer.
pub fn encode_source(s: &SourceSequence) -> Result<String> {
    reject_separator("question", &s.question)?;
    let mut out = format!("{} {SEP} q: {} {SEP}", s.style.token(), s.question);

    if let Markup::AnswerOnly(answer) = &s.markup {
        reject_separator("extracted answer", answer)?;
        out.push(' ');
        out.push_str(&index_token(0));
        out.push(' ');
        out.push_str(answer);
        return Ok(out);
    }

    if s.passages.is_empty() {
        return Err(Error::arg("source needs at least one passage"));
    }
    for (i, text) in s.passages.iter().enumerate() {
        reject_separator(&format!("passage {i}"), text)?;
    }
    if let Markup::AnswerSpan { passage, .. } = s.markup {
        if passage >= s.passages.len() {
            return Err(Error::arg(format!(
                "answer span names passage {passage} but there are {}",
                s.passages.len()
            )));
        }
    }

    for (i, text) in s.passages.iter().enumerate() {
        out.push(' ');
        out.push_str(&index_token(i));
        out.push(' ');
        match s.markup {
            Markup::AnswerSpan { passage, start, end } if passage == i => {
                out.push_str(&mark_span(text, start, end)?);
            }
            _ => out.push_str(text),
        }
        out.push(' ');
        out.push_str(SEP);
    }
    Ok(out)
}

fn mark_span(text: &str, start: usize, end: usize) -> Result<String> {
    let n_chars = text.chars().count();
    if start > end || end > n_chars {
        return Err(Error::arg(format!(
            "answer span {start}..{end} outside passage of {n_chars} chars"
        )));
    }
    let byte_at = |c: usize| {
        text.char_indices()
            .nth(c)
            .map(|(b, _)| b)
            .unwrap_or(text.len())
    };
    let (bs, be) = (byte_at(start), byte_at(end));
    Ok(format!(
        "{}{SPAN_OPEN}{}{SPAN_CLOSE}{}",
        &text[..bs],
        &text[bs..be],
        &text[be..]
    ))
}

/// Fields recovered from an encoded source. Passage texts are verbatim, so
/// any answer-span markup is still present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedSource {
    pub style: StyleTag,
    pub question: String,
    pub passages: Vec<String>,
    /// True when the source ended without a trailing separator (answer-only mode).
    pub answer_only: bool,
}

/// Inverse of [`encode_source`] for inputs without the separator in any field.
pub fn decode_source(encoded: &str) -> Result<DecodedSource> {
    let bad = |msg: &str| Error::Data(format!("malformed source: {msg}"));
    let (style_tok, rest) = encoded
        .split_once(' ')
        .ok_or_else(|| bad("missing style token"))?;
    let style = StyleTag::from_token(style_tok).ok_or_else(|| bad("unknown style token"))?;
    let rest = rest
        .strip_prefix(SEP)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| bad("style token not followed by separator"))?;

    let inner_sep = format!(" {SEP} ");
    let trailing = format!(" {SEP}");
    let (body, answer_only) = match rest.strip_suffix(&trailing) {
        Some(b) => (b, false),
        None => (rest, true),
    };
    let mut segs = body.split(inner_sep.as_str());
    let question = segs
        .next()
        .and_then(|s| s.strip_prefix("q: "))
        .ok_or_else(|| bad("missing `q:` segment"))?
        .to_string();
    let mut passages = Vec::new();
    for (i, seg) in segs.enumerate() {
        let prefix = format!("{} ", index_token(i));
        let text = seg
            .strip_prefix(prefix.as_str())
            .ok_or_else(|| bad(&format!("segment {} should start with `{}`", i + 1, prefix.trim_end())))?;
        passages.push(text.to_string());
    }
    if passages.is_empty() {
        return Err(bad("no passages"));
    }
    if answer_only && passages.len() != 1 {
        return Err(bad("missing trailing separator"));
    }
    Ok(DecodedSource {
        style,
        question,
        passages,
        answer_only,
    })
}

/// Atom-level segmentation used by the debug CLI: the style token, then one
/// entry per separator-delimited segment.
pub fn segments(encoded: &str) -> Vec<String> {
    encoded
        .split(SEP)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
