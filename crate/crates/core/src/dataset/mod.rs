//! Dataset ingestion into a uniform [`QaExample`] model.
//!
//! Loaders are streaming: each yields `Result<QaExample>` per record with no
//! state carried between records, so any prefix of a file loads to a prefix
//! of the full result. Text is NFC-normalized at load time.

mod msmarco;
mod narrativeqa;
mod split;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use msmarco::{load_msmarco, MsMarcoReader, Subset};
pub use narrativeqa::{load_narrativeqa, NarrativeSplit, NARRATIVEQA_TEST_QUESTIONS};
pub use split::{make_validation_split, DatasetSplit, SplitName};

use crate::error::{Error, Result};
use crate::text::is_no_answer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    /// 0-based position within the example as it appears in the dataset.
    pub index: usize,
    pub text: String,
    /// Gold-passage marker.
    pub is_selected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    pub query_id: String,
    pub query: String,
    pub passages: Vec<Passage>,
    pub answers: Vec<String>,
    #[serde(default)]
    pub well_formed_answers: Vec<String>,
    pub answerable: bool,
}

impl QaExample {
    /// Checks the structural invariants. Loaders call this on every record.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let bad = |field: &str, msg: &str| Err((field.to_string(), msg.to_string()));
        if self.query.trim().is_empty() {
            return bad("query", "empty query");
        }
        for (i, p) in self.passages.iter().enumerate() {
            if p.index != i {
                return bad("passages", "passage indices must be 0..n-1 in order");
            }
            if p.text.trim().is_empty() {
                return Err((format!("passages[{i}].passage_text"), "empty passage".into()));
            }
        }
        if self.answerable != !answers_are_no_answer(&self.answers) {
            return bad("answerable", "flag disagrees with the answer set");
        }
        if !self.well_formed_answers.is_empty() && !self.answerable {
            return bad("wellFormedAnswers", "well-formed answers on an unanswerable example");
        }
        Ok(())
    }

    /// NLGEN membership: at least one usable well-formed answer.
    pub fn is_nlgen(&self) -> bool {
        !self.well_formed_answers.is_empty()
    }

    /// Dataset positions of passages flagged as gold.
    pub fn gold_indices(&self) -> Vec<usize> {
        self.passages
            .iter()
            .filter(|p| p.is_selected)
            .map(|p| p.index)
            .collect()
    }

    /// Reference answers for text metrics: well-formed answers when present,
    /// otherwise the plain answers.
    pub fn references(&self) -> &[String] {
        if self.well_formed_answers.is_empty() {
            &self.answers
        } else {
            &self.well_formed_answers
        }
    }
}

/// True iff every answer is the no-answer marker (and there is at least one).
pub fn answers_are_no_answer(answers: &[String]) -> bool {
    !answers.is_empty() && answers.iter().all(|a| is_no_answer(a))
}

/// Drops raw-data sentinels from a well-formed answer list.
pub(crate) fn clean_well_formed(raw: impl IntoIterator<Item = String>) -> Vec<String> {
    raw.into_iter()
        .filter(|a| {
            let t = a.trim();
            !t.is_empty() && t != "[]"
        })
        .collect()
}

/// Writes examples as canonical JSON Lines (one object per line, fixed field order).
pub fn write_canonical<'a, W: Write>(
    out: W,
    examples: impl IntoIterator<Item = &'a QaExample>,
) -> Result<usize> {
    let mut out = BufWriter::new(out);
    let mut n = 0;
    for ex in examples {
        serde_json::to_writer(&mut out, ex)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

/// Streams canonical JSON Lines written by [`write_canonical`].
pub fn read_canonical(path: &Path) -> Result<impl Iterator<Item = Result<QaExample>>> {
    let file = File::open(path).map_err(|e| Error::input(path, e))?;
    let path = path.to_path_buf();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(move |(i, line)| {
            let line = line?;
            let ex: QaExample = serde_json::from_str(&line)
                .map_err(|e| Error::record(&path, i + 1, "<record>", e.to_string()))?;
            ex.validate()
                .map_err(|(field, msg)| Error::record(&path, i + 1, field, msg))?;
            Ok(ex)
        }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(answers: &[&str], wf: &[&str]) -> QaExample {
        QaExample {
            query_id: "1".into(),
            query: "q".into(),
            passages: vec![Passage {
                index: 0,
                text: "t".into(),
                is_selected: true,
                url: None,
            }],
            answers: answers.iter().map(|s| s.to_string()).collect(),
            well_formed_answers: wf.iter().map(|s| s.to_string()).collect(),
            answerable: !answers_are_no_answer(
                &answers.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            ),
        }
    }

    #[test]
    fn validate_accepts_consistent_example() {
        assert!(example(&["x"], &["X is y."]).validate().is_ok());
        assert!(example(&["No Answer Present."], &[]).validate().is_ok());
    }

    #[test]
    fn well_formed_requires_answerable() {
        let err = example(&["No Answer Present."], &["nope"]).validate().unwrap_err();
        assert_eq!(err.0, "wellFormedAnswers");
    }

    #[test]
    fn sentinel_cleanup() {
        let v = clean_well_formed(vec!["[]".into(), " ".into(), "ok".into()]);
        assert_eq!(v, vec!["ok".to_string()]);
    }

    #[test]
    fn canonical_roundtrip_is_byte_stable() {
        let exs = vec![example(&["x"], &[]), example(&["No Answer Present."], &[])];
        let mut a = Vec::new();
        write_canonical(&mut a, &exs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(&p, &a).unwrap();
        let back: Vec<_> = read_canonical(&p).unwrap().collect::<Result<_>>().unwrap();
        let mut b = Vec::new();
        write_canonical(&mut b, &back).unwrap();
        assert_eq!(a, b);
        assert_eq!(back, exs);
    }
}
