use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn genqa(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_genqa"))
        .args(args)
        .env("RUST_LOG", "warn")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut input = child.stdin.take().unwrap();
    input.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(input);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn factuality_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/factuality/factuality.toml")
}

#[test]
fn evaluate_factuality_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = factuality_config();
    let o = genqa(
        &["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "evaluate"],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("| 42.86 | 14.29 |"), "{}", stdout(&o));
    assert!(out.join("evaluation.json").exists());
    assert!(out.join("evaluate.manifest.json").exists());

    let o = genqa(&["report", out.to_str().unwrap(), "--to", dir.path().to_str().unwrap()], None);
    assert!(o.status.success());
    assert!(stdout(&o).contains("| run | 57.36 |"), "{}", stdout(&o));
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn parse_reads_stdin() {
    let o = genqa(&["parse", "--n-passages", "3"], Some("p1: p2: p0: a\nNo Answer Present.\n"));
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["ranking"], serde_json::json!([1, 2, 0]));
    assert_eq!(lines[1]["is_no_answer"], true);
}

#[test]
fn encode_reads_canonical_examples() {
    let example = serde_json::json!({
        "query_id": "q1",
        "query": "what is x",
        "passages": [
            {"index": 0, "text": "x is a letter", "is_selected": true},
            {"index": 1, "text": "y is another", "is_selected": false}
        ],
        "answers": ["a letter"],
        "well_formed_answers": ["X is a letter."],
        "answerable": true
    });
    let o = genqa(&["encode", "--style", "extract"], Some(&format!("{example}\n")));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(
        rec["source"],
        "s:extract </s> q: what is x </s> p0: x is a letter </s> p1: y is another </s>"
    );
    assert_eq!(rec["target"], "p0: p1: a letter");
}

#[test]
fn exit_codes() {
    assert_eq!(genqa(&["--bogus", "evaluate"], None).status.code(), Some(1));
    assert_eq!(genqa(&["evaluate"], None).status.code(), Some(1));
    assert_eq!(genqa(&["--config", "/no/such/file.toml", "evaluate"], None).status.code(), Some(2));
    assert_eq!(genqa(&["parse", "--n-passages", "2", "/no/such/input"], None).status.code(), Some(2));
    assert_eq!(genqa(&["--mode", "sideways", "parse", "--n-passages", "2"], None).status.code(), Some(1));
    assert_eq!(genqa(&["--help"], None).status.code(), Some(0));
}
