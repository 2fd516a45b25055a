use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{answers_are_no_answer, clean_well_formed, Passage, QaExample};
use crate::error::{Error, Result};
use crate::text::nfc;

/// MS MARCO subset selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    #[default]
    All,
    Answerable,
    Nlgen,
}

impl Subset {
    pub fn keeps(self, ex: &QaExample) -> bool {
        match self {
            Subset::All => true,
            Subset::Answerable => ex.answerable,
            Subset::Nlgen => ex.is_nlgen(),
        }
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Subset::All),
            "answerable" => Ok(Subset::Answerable),
            "nlgen" => Ok(Subset::Nlgen),
            other => Err(Error::arg(format!("unknown subset `{other}`"))),
        }
    }
}

/// Streaming reader over MS MARCO 2.1 JSON Lines.
pub struct MsMarcoReader<R> {
    lines: Lines<R>,
    path: PathBuf,
    line_no: usize,
    subset: Subset,
}

/// Opens an MS MARCO JSON Lines file; records are yielded in file order.
pub fn load_msmarco(path: &Path, subset: Subset) -> Result<MsMarcoReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::input(path, e))?;
    Ok(MsMarcoReader::new(BufReader::new(file), path, subset))
}

impl<R: BufRead> MsMarcoReader<R> {
    pub fn new(reader: R, path: impl Into<PathBuf>, subset: Subset) -> Self {
        Self {
            lines: reader.lines(),
            path: path.into(),
            line_no: 0,
            subset,
        }
    }
}

impl<R: BufRead> Iterator for MsMarcoReader<R> {
    type Item = Result<QaExample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_record(&line) {
                Ok(ex) if self.subset.keeps(&ex) => return Some(Ok(ex)),
                Ok(_) => continue,
                Err((field, msg)) => {
                    return Some(Err(Error::record(&self.path, self.line_no, field, msg)))
                }
            }
        }
    }
}

type FieldResult<T> = std::result::Result<T, (String, String)>;

fn fail<T>(field: &str, msg: impl Into<String>) -> FieldResult<T> {
    Err((field.to_string(), msg.into()))
}

fn parse_record(line: &str) -> FieldResult<QaExample> {
    let value: Value = serde_json::from_str(line).or_else(|e| fail("<record>", e.to_string()))?;
    let Value::Object(obj) = value else {
        return fail("<record>", "expected a JSON object");
    };

    let query_id = match obj.get("query_id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return fail("query_id", "expected string or number"),
        None => return fail("query_id", "missing"),
    };
    let query = match obj.get("query") {
        Some(Value::String(s)) if !s.trim().is_empty() => nfc(s),
        Some(Value::String(_)) => return fail("query", "empty query"),
        Some(_) => return fail("query", "expected string"),
        None => return fail("query", "missing"),
    };

    let passages = parse_passages(&obj)?;
    let answers = string_list(&obj, "answers")?.ok_or(("answers".into(), "missing".into()))?;
    if answers.is_empty() {
        return fail("answers", "empty answer list");
    }
    let well_formed = clean_well_formed(string_list(&obj, "wellFormedAnswers")?.unwrap_or_default());

    let answerable = !answers_are_no_answer(&answers);
    let ex = QaExample {
        query_id,
        query,
        passages,
        answers,
        well_formed_answers: well_formed,
        answerable,
    };
    ex.validate()?;
    Ok(ex)
}

fn parse_passages(obj: &Map<String, Value>) -> FieldResult<Vec<Passage>> {
    let Some(raw) = obj.get("passages") else {
        return fail("passages", "missing");
    };
    let Value::Array(items) = raw else {
        return fail("passages", "expected an array");
    };
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let Value::Object(p) = item else {
            return fail(&format!("passages[{i}]"), "expected an object");
        };
        let text = match p.get("passage_text") {
            Some(Value::String(s)) => nfc(s),
            _ => return fail(&format!("passages[{i}].passage_text"), "missing or not a string"),
        };
        let is_selected = match p.get("is_selected") {
            Some(Value::Bool(b)) => *b,
            Some(Value::Number(n)) if n.as_u64() == Some(0) => false,
            Some(Value::Number(n)) if n.as_u64() == Some(1) => true,
            None => false,
            Some(_) => return fail(&format!("passages[{i}].is_selected"), "expected 0/1 or boolean"),
        };
        let url = match p.get("url") {
            Some(Value::String(s)) => Some(s.clone()),
            None | Some(Value::Null) => None,
            Some(_) => return fail(&format!("passages[{i}].url"), "expected string"),
        };
        out.push(Passage {
            index: i,
            text,
            is_selected,
            url,
        });
    }
    Ok(out)
}

/// Reads a list of strings; the raw data sometimes stores the empty list as
/// the string "[]".
fn string_list(obj: &Map<String, Value>, field: &str) -> FieldResult<Option<Vec<String>>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.trim() == "[]" => Ok(Some(Vec::new())),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(nfc(s)),
                _ => fail(field, "expected an array of strings"),
            })
            .collect::<FieldResult<Vec<_>>>()
            .map(Some),
        Some(_) => fail(field, "expected an array of strings"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const THREE: &str = r#"{"query_id": 1, "query": "how many terminals are at jfk", "passages": [{"passage_text": "With six terminals, the airlines that serve JFK airport are spread across.", "is_selected": 1, "url": "http://a"}, {"passage_text": "JFK is in Queens.", "is_selected": 0}], "answers": ["six terminals"], "wellFormedAnswers": ["There are six terminals at the JFK airport."]}
{"query_id": "2", "query": "albany mn population", "passages": [{"passage_text": "Albany, Minnesota has a community population of 2,662 people.", "is_selected": true}], "answers": ["2,662"], "wellFormedAnswers": "[]"}
{"query_id": 3, "query": "what is foo", "passages": [{"passage_text": "Bar.", "is_selected": 0}], "answers": ["No Answer Present."], "wellFormedAnswers": []}
"#;

    fn load(text: &str, subset: Subset) -> Vec<Result<QaExample>> {
        MsMarcoReader::new(Cursor::new(text.to_string()), "mem.jsonl", subset).collect()
    }

    fn ok(text: &str, subset: Subset) -> Vec<QaExample> {
        load(text, subset).into_iter().collect::<Result<_>>().unwrap()
    }

    #[test]
    fn all_subset_keeps_file_order() {
        let ids: Vec<_> = ok(THREE, Subset::All).into_iter().map(|e| e.query_id).collect();
        assert_eq!(ids, ["1", "2", "3"]);
    }

    #[test]
    fn nlgen_excludes_empty_well_formed() {
        let ids: Vec<_> = ok(THREE, Subset::Nlgen).into_iter().map(|e| e.query_id).collect();
        assert_eq!(ids, ["1"]);
    }

    #[test]
    fn answerable_drops_no_answer() {
        let all = ok(THREE, Subset::All);
        assert!(!all[2].answerable);
        assert!(all[0].answerable && all[1].answerable);
        assert_eq!(ok(THREE, Subset::Answerable).len(), 2);
    }

    #[test]
    fn nlgen_is_subset_of_answerable() {
        let ans: Vec<_> = ok(THREE, Subset::Answerable).into_iter().map(|e| e.query_id).collect();
        for ex in ok(THREE, Subset::Nlgen) {
            assert!(ans.contains(&ex.query_id));
        }
    }

    #[test]
    fn malformed_record_reports_line_and_field() {
        let text = format!("{}\n{{\"query_id\": 9, \"query\": \"x\", \"answers\": [\"a\"]}}\n", THREE.lines().next().unwrap());
        let out = load(&text, Subset::All);
        assert!(out[0].is_ok());
        match &out[1] {
            Err(Error::Record { line, field, .. }) => {
                assert_eq!(*line, 2);
                assert_eq!(field, "passages");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_json_is_a_record_error() {
        let out = load("{not json\n", Subset::All);
        assert!(matches!(&out[0], Err(Error::Record { line: 1, .. })));
    }

    #[test]
    fn empty_passage_rejected() {
        let text = r#"{"query_id": 1, "query": "q", "passages": [{"passage_text": "  ", "is_selected": 0}], "answers": ["a"]}"#;
        match &load(text, Subset::All)[0] {
            Err(Error::Record { field, .. }) => assert_eq!(field, "passages[0].passage_text"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_input_error() {
        assert!(matches!(
            load_msmarco(Path::new("/nonexistent/x.jsonl"), Subset::All),
            Err(Error::Input { .. })
        ));
    }

    #[test]
    fn text_is_nfc_normalized() {
        let text = "{\"query_id\": 1, \"query\": \"cafe\\u0301\", \"passages\": [{\"passage_text\": \"p\"}], \"answers\": [\"a\"]}";
        assert_eq!(ok(text, Subset::All)[0].query, "caf\u{e9}");
    }

    #[test]
    fn prefix_of_file_loads_to_prefix() {
        let full = ok(THREE, Subset::All);
        let lines: Vec<_> = THREE.lines().collect();
        for k in 0..=lines.len() {
            let prefix = lines[..k].join("\n");
            assert_eq!(ok(&prefix, Subset::All), full[..k]);
        }
    }
}
