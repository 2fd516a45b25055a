use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GenerationRecord;
use crate::error::{Error, Result};
use crate::seqcodec::parse_generated;

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub query_id: String,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedPredictions {
    /// In order of each query id's first appearance.
    pub records: Vec<GenerationRecord>,
    /// Query ids that appeared more than once; the last line won.
    pub duplicates: Vec<String>,
}

/// Reads a JSON Lines prediction file. `n_passages` gives the passage count
/// used to parse each query's generation.
pub fn load_predictions(path: &Path, n_passages: impl Fn(&str) -> usize) -> Result<LoadedPredictions> {
    let file = File::open(path).map_err(|e| Error::input(path, e))?;
    let mut records: Vec<GenerationRecord> = Vec::new();
    let mut position: HashMap<String, usize> = HashMap::new();
    let mut duplicates = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::input(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PredictionLine = serde_json::from_str(&line)
            .map_err(|e| Error::record(path, i + 1, "<record>", e.to_string()))?;
        if p.query_id.is_empty() {
            return Err(Error::record(path, i + 1, "query_id", "empty"));
        }
        let rec = GenerationRecord {
            parsed: parse_generated(&p.raw, n_passages(&p.query_id)),
            query_id: p.query_id,
            raw: p.raw,
            backend_id: p.backend_id.unwrap_or_else(|| "file".to_string()),
            latency_ms: 0,
        };
        match position.get(&rec.query_id) {
            Some(&at) => {
                tracing::warn!(query_id = %rec.query_id, line = i + 1, "duplicate prediction, keeping the later one");
                duplicates.push(rec.query_id.clone());
                records[at] = rec;
            }
            None => {
                position.insert(rec.query_id.clone(), records.len());
                records.push(rec);
            }
        }
    }
    Ok(LoadedPredictions { records, duplicates })
}

pub fn write_predictions<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a GenerationRecord>,
) -> Result<()> {
    for r in records {
        let line = PredictionLine {
            query_id: r.query_id.clone(),
            raw: r.raw.clone(),
            backend_id: Some(r.backend_id.clone()),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(content: &str) -> Result<LoadedPredictions> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pred.jsonl");
        std::fs::write(&p, content).unwrap();
        load_predictions(&p, |_| 3)
    }

    #[test]
    fn two_lines() {
        let l = load("{\"query_id\":\"1\",\"raw\":\"p1: p0: p2: yes\"}\n{\"query_id\":\"2\",\"raw\":\"no\"}\n").unwrap();
        assert_eq!(l.records.len(), 2);
        assert_eq!(l.records[0].parsed.ranking, [1, 0, 2]);
        assert!(l.duplicates.is_empty());
    }

    #[test]
    fn no_answer_marker() {
        let l = load("{\"query_id\":\"1\",\"raw\":\"No Answer Present.\"}\n").unwrap();
        assert!(l.records[0].parsed.is_no_answer);
    }

    #[test]
    fn duplicate_keeps_last() {
        let l = load("{\"query_id\":\"1\",\"raw\":\"a\"}\n{\"query_id\":\"2\",\"raw\":\"b\"}\n{\"query_id\":\"1\",\"raw\":\"c\"}\n").unwrap();
        assert_eq!(l.records.len(), 2);
        assert_eq!(l.records[0].raw, "c");
        assert_eq!(l.duplicates, ["1"]);
    }

    #[test]
    fn malformed_line_number() {
        let err = load("{\"query_id\":\"1\",\"raw\":\"a\"}\n\n{\"query_id\":2}\n").unwrap_err();
        assert!(matches!(err, Error::Record { line: 3, .. }), "{err}");
    }

    #[test]
    fn write_then_load() {
        let rec = GenerationRecord {
            query_id: "q".into(),
            raw: "p0: x".into(),
            parsed: parse_generated("p0: x", 1),
            backend_id: "m".into(),
            latency_ms: 0,
        };
        let mut buf = Vec::new();
        write_predictions(&mut buf, [&rec]).unwrap();
        let l = load(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(l.records[0].raw, rec.raw);
        assert_eq!(l.records[0].backend_id, "m");
    }
}
