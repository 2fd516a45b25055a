//! Mixed-style training corpora: extractive and conversational examples
//! under one style-token scheme, optionally balanced per origin.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::QaExample;
use crate::error::{Error, Result};
use crate::ranking::RankingProvider;
use crate::seqcodec::{encode_source, encode_target, SourceSequence, StyleTag, TargetSequence};
use crate::text::NO_ANSWER;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub source: String,
    pub target: String,
    pub style: StyleTag,
    pub origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixMode {
    #[default]
    Concat,
    Balanced,
}

impl std::str::FromStr for MixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(MixMode::Concat),
            "balanced" => Ok(MixMode::Balanced),
            other => Err(Error::arg(format!("unknown mix mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MixPolicy {
    pub mode: MixMode,
    pub seed: u64,
    pub shuffle: bool,
}

/// Examples from one dataset, all trained under one style.
#[derive(Debug, Clone)]
pub struct CorpusSource {
    pub origin: String,
    pub style: StyleTag,
    pub examples: Vec<QaExample>,
}

/// Counts of examples that produced no row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    /// Conversational examples with no well-formed answer.
    pub missing_well_formed: usize,
    /// Examples whose answer is blank or whose text cannot be encoded.
    pub invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedCorpus {
    pub rows: Vec<CorpusRow>,
    /// Rows emitted per origin.
    pub per_origin: BTreeMap<String, usize>,
    pub skipped: BTreeMap<String, SkipCounts>,
}

pub(crate) fn target_answer(ex: &QaExample, style: StyleTag) -> Option<&str> {
    match style {
        StyleTag::Extract if !ex.answerable => Some(NO_ANSWER),
        StyleTag::Extract => ex.answers.first().map(String::as_str),
        StyleTag::Conv => ex.well_formed_answers.first().map(String::as_str),
    }
}

fn build_rows(
    src: &CorpusSource,
    provider: &dyn RankingProvider,
    skipped: &mut SkipCounts,
) -> Result<Vec<CorpusRow>> {
    let mut rows = Vec::with_capacity(src.examples.len());
    for ex in &src.examples {
        let Some(answer) = target_answer(ex, src.style) else {
            tracing::warn!(query_id = %ex.query_id, origin = %src.origin, "no well-formed answer, skipping");
            skipped.missing_well_formed += 1;
            continue;
        };
        let arrangement = provider.arrange(ex)?;
        let target = TargetSequence::new(arrangement.target_ranking.clone(), answer.trim());
        let source = SourceSequence::new(src.style, ex.query.clone(), arrangement.texts());
        match (encode_source(&source), encode_target(&target)) {
            (Ok(source), Ok(target)) => rows.push(CorpusRow {
                source,
                target,
                style: src.style,
                origin: src.origin.clone(),
            }),
            (Err(e), _) | (_, Err(e)) => {
                tracing::warn!(query_id = %ex.query_id, error = %e, "cannot encode example, skipping");
                skipped.invalid += 1;
            }
        }
    }
    Ok(rows)
}

/// Builds the corpus. Rows are grouped by origin in `sources` order, then
/// shuffled if the policy asks for it. All randomness comes from `policy.seed`.
pub fn build_mixed_corpus(
    sources: &[CorpusSource],
    policy: &MixPolicy,
    provider: &dyn RankingProvider,
) -> Result<MixedCorpus> {
    if policy.mode == MixMode::Balanced {
        if sources.len() < 2 {
            return Err(Error::arg("balanced mixing needs at least two origins"));
        }
        if let Some(empty) = sources.iter().find(|s| s.examples.is_empty()) {
            return Err(Error::arg(format!("origin {} has no examples", empty.origin)));
        }
    }

    let mut skipped = BTreeMap::new();
    let mut groups = Vec::with_capacity(sources.len());
    for src in sources {
        let mut skips = SkipCounts::default();
        groups.push(build_rows(src, provider, &mut skips)?);
        skipped.insert(src.origin.clone(), skips);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    if policy.mode == MixMode::Balanced {
        let min = groups.iter().map(Vec::len).min().unwrap_or(0);
        for group in &mut groups {
            if group.len() > min {
                let mut keep = sample(&mut rng, group.len(), min).into_vec();
                keep.sort_unstable();
                let old = std::mem::take(group);
                let mut keep = keep.into_iter().peekable();
                for (i, row) in old.into_iter().enumerate() {
                    if keep.peek() == Some(&i) {
                        keep.next();
                        group.push(row);
                    }
                }
            }
        }
    }

    let mut per_origin = BTreeMap::new();
    for (src, group) in sources.iter().zip(&groups) {
        *per_origin.entry(src.origin.clone()).or_insert(0) += group.len();
    }
    let mut rows: Vec<CorpusRow> = groups.into_iter().flatten().collect();
    if policy.shuffle {
        rows.shuffle(&mut rng);
    }
    Ok(MixedCorpus {
        rows,
        per_origin,
        skipped,
    })
}

pub fn style_histogram<'a>(rows: impl IntoIterator<Item = &'a CorpusRow>) -> BTreeMap<StyleTag, usize> {
    let mut out = BTreeMap::new();
    for r in rows {
        *out.entry(r.style).or_insert(0) += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub tool_version: String,
    pub policy: MixPolicy,
    pub rows: usize,
    pub per_origin: BTreeMap<String, usize>,
    pub skipped: BTreeMap<String, SkipCounts>,
    pub styles: BTreeMap<StyleTag, usize>,
}

impl CorpusManifest {
    pub fn new(corpus: &MixedCorpus, policy: &MixPolicy) -> Self {
        Self {
            tool_version: crate::TOOL_VERSION.to_string(),
            policy: *policy,
            rows: corpus.rows.len(),
            per_origin: corpus.per_origin.clone(),
            skipped: corpus.skipped.clone(),
            styles: style_histogram(&corpus.rows),
        }
    }
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const CORPUS_MANIFEST_FILE: &str = "corpus.manifest.json";

/// Writes `corpus.jsonl` and `corpus.manifest.json` into `dir`.
pub fn write_corpus(dir: &Path, corpus: &MixedCorpus, policy: &MixPolicy) -> Result<CorpusManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::input(dir, e))?;
    let path = dir.join(CORPUS_FILE);
    let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::input(&path, e))?);
    for row in &corpus.rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let manifest = CorpusManifest::new(corpus, policy);
    let path = dir.join(CORPUS_MANIFEST_FILE);
    let mut f = File::create(&path).map_err(|e| Error::input(&path, e))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(manifest)
}
