use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Passage, QaExample};
use crate::error::{Error, Result};
use crate::text::nfc;

/// Published size of the NarrativeQA test split (questions).
pub const NARRATIVEQA_TEST_QUESTIONS: usize = 10_557;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NarrativeSplit {
    Train,
    Dev,
    Test,
}

impl NarrativeSplit {
    /// Value of the `set` column in the published CSV files.
    pub fn csv_tag(self) -> &'static str {
        match self {
            NarrativeSplit::Train => "train",
            NarrativeSplit::Dev => "valid",
            NarrativeSplit::Test => "test",
        }
    }
}

impl FromStr for NarrativeSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(NarrativeSplit::Train),
            "dev" | "valid" | "validation" => Ok(NarrativeSplit::Dev),
            "test" => Ok(NarrativeSplit::Test),
            other => Err(Error::arg(format!("unknown NarrativeQA split `{other}`"))),
        }
    }
}

/// Loads NarrativeQA questions over the summaries task: one passage (the
/// summary) per question, both reference answers kept.
///
/// `qaps` is the question/answer CSV and `summaries` the summaries CSV; they
/// are joined on `document_id`. Summaries are read eagerly, questions are
/// streamed.
pub fn load_narrativeqa(
    qaps: &Path,
    summaries: &Path,
    split: NarrativeSplit,
) -> Result<impl Iterator<Item = Result<QaExample>>> {
    let summary_by_doc = read_summaries(summaries)?;
    let file = File::open(qaps).map_err(|e| Error::input(qaps, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::record(qaps, 1, name, "missing column"))
    };
    let (doc_col, set_col, q_col, a1_col, a2_col) = (
        col("document_id")?,
        col("set")?,
        col("question")?,
        col("answer1")?,
        col("answer2")?,
    );
    let path: PathBuf = qaps.to_path_buf();
    let tag = split.csv_tag();

    Ok(reader
        .into_records()
        .enumerate()
        .filter_map(move |(row, rec)| {
            let line = row + 2;
            let rec = match rec {
                Ok(r) => r,
                Err(e) => return Some(Err(e.into())),
            };
            let get = |i: usize| rec.get(i).unwrap_or("");
            if get(set_col) != tag {
                return None;
            }
            let doc = get(doc_col);
            let Some(summary) = summary_by_doc.get(doc) else {
                return Some(Err(Error::record(
                    &path,
                    line,
                    "document_id",
                    format!("question references missing document {doc}"),
                )));
            };
            let query = nfc(get(q_col));
            if query.trim().is_empty() {
                return Some(Err(Error::record(&path, line, "question", "empty question")));
            }
            let answers: Vec<String> = [get(a1_col), get(a2_col)]
                .into_iter()
                .filter(|a| !a.trim().is_empty())
                .map(nfc)
                .collect();
            if answers.is_empty() {
                return Some(Err(Error::record(&path, line, "answer1", "no reference answers")));
            }
            Some(Ok(QaExample {
                query_id: format!("{doc}#{row}"),
                query,
                passages: vec![Passage {
                    index: 0,
                    text: summary.clone(),
                    is_selected: true,
                    url: None,
                }],
                answers,
                well_formed_answers: Vec::new(),
                answerable: true,
            }))
        }))
}

fn read_summaries(path: &Path) -> Result<HashMap<String, String>> {
    let file = File::open(path).map_err(|e| Error::input(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let doc_col = headers
        .iter()
        .position(|h| h == "document_id")
        .ok_or_else(|| Error::record(path, 1, "document_id", "missing column"))?;
    let sum_col = headers
        .iter()
        .position(|h| h == "summary")
        .ok_or_else(|| Error::record(path, 1, "summary", "missing column"))?;
    let mut out = HashMap::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let text = nfc(rec.get(sum_col).unwrap_or(""));
        if text.trim().is_empty() {
            return Err(Error::record(path, row + 2, "summary", "empty summary"));
        }
        out.insert(rec.get(doc_col).unwrap_or("").to_string(), text);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    const SUMMARIES: &str = "document_id,set,summary,summary_tokenized\nd1,train,\"Mark, a sailor, returns home.\",x\nd2,test,The ship sinks.,x\n";

    #[test]
    fn joins_questions_with_summary() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "s.csv", SUMMARIES);
        let q = write(
            dir.path(),
            "q.csv",
            "document_id,set,question,answer1,answer2,question_tokenized,answer1_tokenized,answer2_tokenized\n\
             d1,train,Who returns?,Mark,A sailor named Mark,x,x,x\n\
             d1,train,Where?,home,His home,x,x,x\n\
             d2,test,What sinks?,The ship,ship,x,x,x\n",
        );
        let exs: Vec<_> = load_narrativeqa(&q, &s, NarrativeSplit::Train)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(exs.len(), 2);
        for ex in &exs {
            assert_eq!(ex.passages.len(), 1);
            assert_eq!(ex.passages[0].text, "Mark, a sailor, returns home.");
            assert_eq!(ex.answers.len(), 2);
            assert!(ex.answerable);
        }
        let test: Vec<_> = load_narrativeqa(&q, &s, NarrativeSplit::Test).unwrap().collect();
        assert_eq!(test.len(), 1);
    }

    #[test]
    fn missing_document_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "s.csv", SUMMARIES);
        let q = write(
            dir.path(),
            "q.csv",
            "document_id,set,question,answer1,answer2\nd9,train,Who?,a,b\n",
        );
        let err = load_narrativeqa(&q, &s, NarrativeSplit::Train)
            .unwrap()
            .next()
            .unwrap()
            .unwrap_err();
        assert!(err.to_string().contains("d9"), "{err}");
    }

    #[test]
    fn split_names() {
        assert_eq!("dev".parse::<NarrativeSplit>().unwrap().csv_tag(), "valid");
        assert!("nope".parse::<NarrativeSplit>().is_err());
    }
}
