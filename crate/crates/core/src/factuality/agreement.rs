use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::judge::ExampleVerdict;
use crate::error::{Error, Result};

/// Human judgement of one generated answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanAnnotation {
    pub query_id: String,
    pub factual_vs_passage: bool,
    pub correct_vs_gold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Fraction of examples where automated N-P equals the human judgement.
    pub np_agreement: f64,
    /// Same for N-A.
    pub na_agreement: f64,
    pub n_examples: usize,
}

/// Compares automated verdicts with human annotations, matched by query id.
pub fn human_agreement(auto: &[ExampleVerdict], human: &[HumanAnnotation]) -> Result<Agreement> {
    if auto.len() != human.len() {
        return Err(Error::arg(format!(
            "{} automated verdicts but {} annotations",
            auto.len(),
            human.len()
        )));
    }
    if auto.is_empty() {
        return Err(Error::arg("no annotated examples"));
    }
    let by_id: HashMap<&str, &ExampleVerdict> =
        auto.iter().map(|v| (v.query_id.as_str(), v)).collect();
    let (mut np, mut na) = (0usize, 0usize);
    for h in human {
        let v = by_id.get(h.query_id.as_str()).ok_or_else(|| {
            Error::arg(format!("annotation for unknown query id {}", h.query_id))
        })?;
        np += usize::from(v.factual == h.factual_vs_passage);
        na += usize::from(v.correct == h.correct_vs_gold);
    }
    let n = human.len() as f64;
    Ok(Agreement {
        np_agreement: np as f64 / n,
        na_agreement: na as f64 / n,
        n_examples: human.len(),
    })
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Some(true),
        "false" | "0" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Reads the annotation CSV (`query_id,factual_vs_passage,correct_vs_gold`).
pub fn load_annotations(path: &Path) -> Result<Vec<HumanAnnotation>> {
    let file = File::open(path).map_err(|e| Error::input(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::record(path, 1, name, "missing column"))
    };
    let (id_col, np_col, na_col) = (col("query_id")?, col("factual_vs_passage")?, col("correct_vs_gold")?);
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let field = |i: usize, name: &str| {
            rec.get(i)
                .and_then(parse_bool)
                .ok_or_else(|| Error::record(path, line, name, "expected a boolean"))
        };
        out.push(HumanAnnotation {
            query_id: rec.get(id_col).unwrap_or("").trim().to_string(),
            factual_vs_passage: field(np_col, "factual_vs_passage")?,
            correct_vs_gold: field(na_col, "correct_vs_gold")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(id: &str, factual: bool, correct: bool) -> ExampleVerdict {
        ExampleVerdict {
            query_id: id.into(),
            factual,
            correct,
            np_labels: vec![],
            na_labels: vec![],
            conflicting: false,
        }
    }

    fn human(id: &str, f: bool, c: bool) -> HumanAnnotation {
        HumanAnnotation {
            query_id: id.into(),
            factual_vs_passage: f,
            correct_vs_gold: c,
        }
    }

    #[test]
    fn identical_labelings() {
        let a = vec![verdict("1", true, false), verdict("2", false, true)];
        let h = vec![human("2", false, true), human("1", true, false)];
        let r = human_agreement(&a, &h).unwrap();
        assert_eq!((r.np_agreement, r.na_agreement), (1.0, 1.0));
    }

    #[test]
    fn counting() {
        let a = vec![verdict("1", true, true), verdict("2", true, true), verdict("3", false, true)];
        let h = vec![human("1", true, true), human("2", false, true), human("3", false, true)];
        let r = human_agreement(&a, &h).unwrap();
        assert!((r.np_agreement - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.na_agreement, 1.0);
    }

    #[test]
    fn unknown_id_is_named() {
        let err = human_agreement(&[verdict("1", true, true)], &[human("zz", true, true)]).unwrap_err();
        assert!(err.to_string().contains("zz"));
        assert!(human_agreement(&[verdict("1", true, true)], &[]).is_err());
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        std::fs::write(&p, "query_id,factual_vs_passage,correct_vs_gold\nq1,true,0\nq2,no,yes\n").unwrap();
        assert_eq!(load_annotations(&p).unwrap(), vec![human("q1", true, false), human("q2", false, true)]);
        std::fs::write(&p, "query_id,factual_vs_passage,correct_vs_gold\nq1,maybe,0\n").unwrap();
        assert!(matches!(load_annotations(&p), Err(Error::Record { line: 2, .. })));
    }
}
