use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::manifest::{write_json, RunManifest};
use super::{PipelineConfig, Stage};
use crate::dataset::{
    load_msmarco, load_narrativeqa, make_validation_split, read_canonical, write_canonical, QaExample,
};
use crate::error::{BackendError, Error, Result};
use crate::inference::{
    generate_batch, write_predictions, BatchOptions, GenerationBackend, GenerationCache,
    GenerationRecord, GenerationRequest, HttpGenerationClient,
};
use crate::mst::{build_mixed_corpus, target_answer, write_corpus, CorpusSource};
use crate::ranking::{load_scores, Arrangement, RankedConfig, RankingProvider, ScoreTable};
use crate::seqcodec::{
    encode_source, encode_target, index_token, parse_generated, segments, ParsedGeneration,
    SourceSequence, StyleTag, TargetSequence,
};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";

pub(crate) fn load_examples(path: &Path) -> Result<Vec<QaExample>> {
    read_canonical(path)?.collect()
}

/// Passage arrangement for the configured ranking mode.
///
/// With `strict` unset, end-to-end mode without a scores file falls back to
/// dataset order: the source is the same, only the reference ranking is lost.
pub(crate) fn ranking_provider(cfg: &PipelineConfig, strict: bool) -> Result<ScoreTable> {
    let mode = cfg.ranking.ranked_config()?;
    match (&cfg.ranking.scores, mode) {
        (Some(path), _) => Ok(ScoreTable::new(mode, load_scores(path)?)),
        (None, RankedConfig::NoRanking) => Ok(ScoreTable::unranked()),
        (None, RankedConfig::EndToEnd) if !strict => Ok(ScoreTable::unranked()),
        (None, _) => Err(Error::config(format!(
            "ranking mode {} needs ranking.scores",
            cfg.ranking.mode
        ))),
    }
}

pub(crate) fn encode_for(
    ex: &QaExample,
    provider: &dyn RankingProvider,
    style: StyleTag,
) -> Result<(Arrangement, String)> {
    let arrangement = provider.arrange(ex)?;
    let source = SourceSequence::new(style, ex.query.clone(), arrangement.texts());
    let encoded = encode_source(&source)
        .map_err(|e| Error::Data(format!("query {}: {e}", ex.query_id)))?;
    Ok((arrangement, encoded))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::input(path, e))?))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::input(dir, e))
}

/// Loads raw datasets and writes them as canonical JSON Lines.
pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate(Stage::Ingest)?;
    ensure_dir(&cfg.out_dir)?;
    let mut m = RunManifest::new("ingest", cfg)?;

    if let Some(path) = &cfg.data.msmarco {
        m.add_input(path)?;
        let examples: Vec<QaExample> =
            m.time("load_msmarco", |_| load_msmarco(path, cfg.data.subset)?.collect())?;
        m.count("msmarco", examples.len());
        write_canonical(create(&cfg.out_dir.join("msmarco.jsonl"))?, &examples)?;

        if let Some(size) = cfg.data.validation_size {
            let ids: Vec<String> = examples.iter().map(|e| e.query_id.clone()).collect();
            let (validation, train) = make_validation_split(&ids, size, cfg.seed)?;
            let held: std::collections::HashSet<&str> =
                validation.example_ids.iter().map(String::as_str).collect();
            let (val, rest): (Vec<&QaExample>, Vec<&QaExample>) =
                examples.iter().partition(|e| held.contains(e.query_id.as_str()));
            write_canonical(create(&cfg.out_dir.join("msmarco.validation.jsonl"))?, val)?;
            write_canonical(create(&cfg.out_dir.join("msmarco.train.jsonl"))?, rest)?;
            write_json(&cfg.out_dir.join("split.json"), &[&validation, &train])?;
            m.count("msmarco.validation", validation.example_ids.len());
            m.count("msmarco.train", train.example_ids.len());
        }
    }
    if let Some(nqa) = &cfg.data.narrativeqa {
        m.add_input(&nqa.qaps)?;
        m.add_input(&nqa.summaries)?;
        let examples: Vec<QaExample> = m.time("load_narrativeqa", |_| {
            load_narrativeqa(&nqa.qaps, &nqa.summaries, nqa.split)?.collect()
        })?;
        m.count("narrativeqa", examples.len());
        write_canonical(create(&cfg.out_dir.join("narrativeqa.jsonl"))?, &examples)?;
    }
    m.write(&cfg.out_dir)?;
    Ok(m)
}

/// Builds the mixed-style training corpus into the output directory.
pub fn cmd_build_corpus(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate(Stage::BuildCorpus)?;
    ensure_dir(&cfg.out_dir)?;
    let mut m = RunManifest::new("build-corpus", cfg)?;
    let provider = ranking_provider(cfg, true)?;
    let mut sources = Vec::with_capacity(cfg.corpus.sources.len());
    for s in &cfg.corpus.sources {
        m.add_input(&s.path)?;
        let examples = load_examples(&s.path)?;
        m.count(&format!("input.{}", s.origin), examples.len());
        sources.push(CorpusSource {
            origin: s.origin.clone(),
            style: s.style,
            examples,
        });
    }
    if let Some(p) = &cfg.ranking.scores {
        m.add_input(p)?;
    }
    let policy = cfg.mix_policy();
    let corpus = m.time("mix", |_| build_mixed_corpus(&sources, &policy, &provider))?;
    for (origin, skips) in &corpus.skipped {
        if skips.missing_well_formed + skips.invalid > 0 {
            m.warn(format!(
                "{origin}: skipped {} without well-formed answer, {} unencodable",
                skips.missing_well_formed, skips.invalid
            ));
        }
    }
    for (origin, n) in &corpus.per_origin {
        m.count(&format!("corpus.{origin}"), *n);
    }
    m.count("corpus", corpus.rows.len());
    write_corpus(&cfg.out_dir, &corpus, &policy)?;
    m.write(&cfg.out_dir)?;
    Ok(m)
}

/// One line of `encode` output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedRecord {
    pub query_id: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedRecord {
    pub query_id: String,
    pub source: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineReport {
    pub ok: usize,
    /// (1-based line, message)
    pub failed: Vec<(usize, String)>,
}

/// Encodes canonical example lines into source/target pairs, one output line
/// per input line. Bad lines are reported and skipped.
pub fn cmd_encode(
    cfg: &PipelineConfig,
    input: impl BufRead,
    mut out: impl Write,
    style: StyleTag,
    segmented: bool,
) -> Result<LineReport> {
    cfg.validate(Stage::Encode)?;
    let provider = ranking_provider(cfg, true)?;
    let mut report = LineReport::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let encoded = serde_json::from_str::<QaExample>(&line)
            .map_err(Error::from)
            .and_then(|ex| encode_line(&ex, &provider, style).map(|rec| (ex.passages.len(), rec)));
        match encoded {
            Ok((n, rec)) if segmented => {
                let target_tokens = {
                    let parsed = parse_generated(&rec.target, n);
                    let mut t: Vec<String> = parsed.ranking.iter().map(|&i| index_token(i)).collect();
                    t.push(parsed.answer);
                    t
                };
                serde_json::to_writer(
                    &mut out,
                    &SegmentedRecord {
                        query_id: rec.query_id,
                        source: segments(&rec.source),
                        target: target_tokens,
                    },
                )?;
                out.write_all(b"\n")?;
                report.ok += 1;
            }
            Ok((_, rec)) => {
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
                report.ok += 1;
            }
            Err(e) => {
                tracing::warn!(line = i + 1, error = %e, "cannot encode");
                report.failed.push((i + 1, e.to_string()));
            }
        }
    }
    out.flush()?;
    Ok(report)
}

fn encode_line(ex: &QaExample, provider: &dyn RankingProvider, style: StyleTag) -> Result<EncodedRecord> {
    ex.validate()
        .map_err(|(field, msg)| Error::Data(format!("field `{field}`: {msg}")))?;
    let (arrangement, source) = encode_for(ex, provider, style)?;
    let answer = target_answer(ex, style)
        .ok_or_else(|| Error::Data(format!("query {}: no answer for style {style}", ex.query_id)))?;
    let target = encode_target(&TargetSequence::new(arrangement.target_ranking, answer.trim()))?;
    Ok(EncodedRecord {
        query_id: ex.query_id.clone(),
        source,
        target,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    pub raw: String,
    #[serde(flatten)]
    pub parsed: ParsedGeneration,
}

/// Parses generated text, one record per line. With `jsonl`, lines are
/// prediction records `{query_id, raw}`; otherwise each line is raw text.
pub fn cmd_parse(input: impl BufRead, mut out: impl Write, n_passages: usize, jsonl: bool) -> Result<LineReport> {
    #[derive(Deserialize)]
    struct Line {
        query_id: String,
        raw: String,
    }
    let mut report = LineReport::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let (query_id, raw) = if jsonl {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Line>(&line) {
                Ok(l) => (Some(l.query_id), l.raw),
                Err(e) => {
                    report.failed.push((i + 1, e.to_string()));
                    continue;
                }
            }
        } else {
            (None, line)
        };
        let rec = ParsedRecord {
            query_id,
            parsed: parse_generated(&raw, n_passages),
            raw,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
        report.ok += 1;
    }
    out.flush()?;
    Ok(report)
}

/// Answers only from the generation cache.
struct CacheOnly(String);

impl GenerationBackend for CacheOnly {
    fn backend_id(&self) -> &str {
        &self.0
    }

    fn generate(&self, _: &str, _: usize) -> std::result::Result<String, BackendError> {
        Err(BackendError::CacheMiss)
    }
}

/// Generation requests for `examples`, arranged per the ranking config.
pub(crate) fn generation_requests(
    cfg: &PipelineConfig,
    examples: &[QaExample],
    provider: &dyn RankingProvider,
) -> Result<Vec<GenerationRequest>> {
    examples
        .iter()
        .map(|ex| {
            let (_, source) = encode_for(ex, provider, cfg.generation.style)?;
            GenerationRequest::new(&ex.query_id, source, cfg.generation.max_new_tokens)
        })
        .collect()
}

/// Runs generation for `examples`. Successful records are returned in input
/// order; if any request failed, the successes are written by the caller and
/// the error lists the failed ids.
pub(crate) fn run_generation(
    cfg: &PipelineConfig,
    examples: &[QaExample],
    provider: &dyn RankingProvider,
    m: &mut RunManifest,
) -> std::result::Result<Vec<GenerationRecord>, (Vec<GenerationRecord>, Error)> {
    let setup = || -> Result<(Vec<GenerationRequest>, Box<dyn GenerationBackend>, GenerationCache)> {
        let requests = generation_requests(cfg, examples, provider)?;
        let g = &cfg.generation;
        let backend: Box<dyn GenerationBackend> = match &g.endpoint {
            Some(url) => Box::new(
                HttpGenerationClient::new(url, g.backend_id.clone(), Duration::from_millis(g.timeout_ms))
                    .with_params(g.params.clone()),
            ),
            None => Box::new(CacheOnly(g.backend_id.clone())),
        };
        let cache = match (&g.cache, &g.endpoint) {
            (Some(p), Some(_)) => GenerationCache::open(p)?,
            (Some(p), None) => GenerationCache::open_read_only(p)?,
            (None, _) => GenerationCache::in_memory(),
        };
        Ok((requests, backend, cache))
    };
    let (requests, backend, cache) = setup().map_err(|e| (Vec::new(), e))?;
    let opts = BatchOptions {
        max_in_flight: cfg.generation.max_in_flight,
        retry: cfg.retry,
    };
    let started = std::time::Instant::now();
    let result = generate_batch(&requests, backend.as_ref(), &cache, &opts);
    m.stages.push(super::manifest::StageTiming {
        stage: "generate".into(),
        wall_ms: started.elapsed().as_millis() as u64,
    });
    match result {
        Ok(records) => {
            m.count("generated", records.len());
            Ok(records)
        }
        Err(partial) => {
            let total = partial.slots.len();
            let failed: Vec<String> = partial.failed.iter().map(|(id, _)| id.clone()).collect();
            for (id, e) in &partial.failed {
                m.warn(format!("generation failed for {id}: {e}"));
            }
            let ok: Vec<GenerationRecord> = partial.slots.into_iter().flatten().collect();
            m.count("generated", ok.len());
            Err((ok, Error::Generation { failed, total }))
        }
    }
}

/// Generates predictions for the gold set into `predictions.jsonl`.
pub fn cmd_generate(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate(Stage::Generate)?;
    ensure_dir(&cfg.out_dir)?;
    let mut m = RunManifest::new("generate", cfg)?;
    let gold_path = cfg.data.gold.as_deref().expect("validated");
    m.add_input(gold_path)?;
    let examples = load_examples(gold_path)?;
    m.count("gold", examples.len());
    let provider = ranking_provider(cfg, false)?;
    let (records, err) = match run_generation(cfg, &examples, &provider, &mut m) {
        Ok(r) => (r, None),
        Err((r, e)) => (r, Some(e)),
    };
    let path: PathBuf = cfg.out_dir.join(PREDICTIONS_FILE);
    write_predictions(create(&path)?, &records)?;
    m.write(&cfg.out_dir)?;
    match err {
        Some(e) => Err(e),
        None => Ok(m),
    }
}

/// Passage count per query id in the arranged sources.
pub(crate) fn passage_counts(arrangements: &HashMap<String, Arrangement>) -> impl Fn(&str) -> usize + '_ {
    |id| {
        arrangements
            .get(id)
            .map_or(crate::ranking::MAX_TOP_N, |a| a.passages.len())
    }
}
