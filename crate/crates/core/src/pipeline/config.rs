use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{NarrativeSplit, Subset};
use crate::error::{Error, Result};
use crate::factuality::PremiseMode;
use crate::metrics::MetricConfig;
use crate::mst::{MixMode, MixPolicy};
use crate::ranking::RankedConfig;
use crate::retry::RetryPolicy;
use crate::seqcodec::StyleTag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seeds every stochastic step.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Prediction file (`{query_id, raw}` lines) read by `evaluate`.
    pub predictions: Option<PathBuf>,
    pub data: DataConfig,
    pub ranking: RankingConfig,
    pub corpus: CorpusConfig,
    pub generation: GenerationConfig,
    pub metrics: MetricConfig,
    pub factuality: FactualitySettings,
    pub retry: RetryPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 13,
            out_dir: PathBuf::from("out"),
            predictions: None,
            data: DataConfig::default(),
            ranking: RankingConfig::default(),
            corpus: CorpusConfig::default(),
            generation: GenerationConfig::default(),
            metrics: MetricConfig::default(),
            factuality: FactualitySettings::default(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Raw MS MARCO JSON Lines for `ingest`.
    pub msmarco: Option<PathBuf>,
    pub subset: Subset,
    pub narrativeqa: Option<NarrativeQaPaths>,
    /// If set, `ingest` also writes a seeded validation/train split of this size.
    pub validation_size: Option<usize>,
    /// Canonical examples used by `generate` and `evaluate`.
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NarrativeQaPaths {
    pub qaps: PathBuf,
    pub summaries: PathBuf,
    pub split: NarrativeSplit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingConfig {
    /// `ranked_n`, `no_ranking` or `end_to_end`.
    pub mode: String,
    pub top_n: Option<usize>,
    /// Reranker scores, JSON Lines of `{query_id, scores}`.
    pub scores: Option<PathBuf>,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            mode: "no_ranking".into(),
            top_n: None,
            scores: None,
        }
    }
}

impl RankingConfig {
    pub fn ranked_config(&self) -> Result<RankedConfig> {
        RankedConfig::from_parts(&self.mode, self.top_n).map_err(|e| Error::config(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub mode: MixMode,
    pub shuffle: bool,
    pub sources: Vec<CorpusSourceConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSourceConfig {
    pub origin: String,
    pub style: StyleTag,
    /// Canonical examples, as written by `ingest`.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub endpoint: Option<String>,
    pub backend_id: String,
    pub style: StyleTag,
    pub max_new_tokens: usize,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    pub cache: Option<PathBuf>,
    /// Passed through verbatim in every `/generate` body.
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            backend_id: "default".into(),
            style: StyleTag::Conv,
            max_new_tokens: 64,
            max_in_flight: 4,
            timeout_ms: 60_000,
            cache: None,
            params: serde_json::Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactualitySettings {
    pub endpoint: Option<String>,
    /// Verdict cache. Read-only when no endpoint is configured.
    pub cache: Option<PathBuf>,
    pub premise_mode: PremiseMode,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    /// Human annotation CSV to compare verdicts against.
    pub annotations: Option<PathBuf>,
}

impl Default for FactualitySettings {
    fn default() -> Self {
        Self {
            endpoint: None,
            cache: None,
            premise_mode: PremiseMode::Passage,
            max_in_flight: 4,
            timeout_ms: 60_000,
            annotations: None,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub subset: Option<Subset>,
    pub mode: Option<String>,
    pub top_n: Option<usize>,
    pub predictions: Option<PathBuf>,
    pub nli_cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Pipeline stage, for stage-specific validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    BuildCorpus,
    Encode,
    Generate,
    Evaluate,
}

impl PipelineConfig {
    /// Parses a TOML file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::input(path, e))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        let optional = [
            &mut self.predictions,
            &mut self.data.msmarco,
            &mut self.data.gold,
            &mut self.ranking.scores,
            &mut self.generation.cache,
            &mut self.factuality.cache,
            &mut self.factuality.annotations,
        ];
        for p in optional.into_iter().flatten() {
            fix(p);
        }
        if let Some(nqa) = &mut self.data.narrativeqa {
            fix(&mut nqa.qaps);
            fix(&mut nqa.summaries);
        }
        for s in &mut self.corpus.sources {
            fix(&mut s.path);
        }
    }

    pub fn apply(&mut self, o: Overrides) -> Result<()> {
        if let Some(s) = o.subset {
            self.data.subset = s;
        }
        if let Some(m) = o.mode {
            if m != "ranked_n" && o.top_n.is_none() {
                self.ranking.top_n = None;
            }
            self.ranking.mode = m;
        }
        if o.top_n.is_some() {
            self.ranking.top_n = o.top_n;
        }
        if o.predictions.is_some() {
            self.predictions = o.predictions;
        }
        if o.nli_cache.is_some() {
            self.factuality.cache = o.nli_cache;
        }
        if let Some(out) = o.out {
            self.out_dir = out;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        self.ranking.ranked_config()?;
        Ok(())
    }

    pub fn mix_policy(&self) -> MixPolicy {
        MixPolicy {
            mode: self.corpus.mode,
            seed: self.seed,
            shuffle: self.corpus.shuffle,
        }
    }

    /// Checks settings and that every input the stage reads exists.
    pub fn validate(&self, stage: Stage) -> Result<()> {
        let ranked = self.ranking.ranked_config()?;
        self.metrics.validate().map_err(|e| Error::config(e.to_string()))?;
        let mut inputs: Vec<(&str, &Path)> = Vec::new();
        let gold = || {
            self.data
                .gold
                .as_deref()
                .ok_or_else(|| Error::config("data.gold is required for this command"))
        };
        match stage {
            Stage::Ingest => {
                if self.data.msmarco.is_none() && self.data.narrativeqa.is_none() {
                    return Err(Error::config("ingest needs data.msmarco or data.narrativeqa"));
                }
                if let Some(p) = &self.data.msmarco {
                    inputs.push(("data.msmarco", p));
                }
                if let Some(n) = &self.data.narrativeqa {
                    inputs.push(("data.narrativeqa.qaps", &n.qaps));
                    inputs.push(("data.narrativeqa.summaries", &n.summaries));
                }
                if self.data.validation_size == Some(0) {
                    return Err(Error::config("data.validation_size must be positive"));
                }
            }
            Stage::BuildCorpus => {
                if self.corpus.sources.is_empty() {
                    return Err(Error::config("corpus.sources is empty"));
                }
                if self.corpus.mode == MixMode::Balanced && self.corpus.sources.len() < 2 {
                    return Err(Error::config("balanced mixing needs at least two corpus sources"));
                }
                for s in &self.corpus.sources {
                    inputs.push(("corpus.sources.path", &s.path));
                }
                if ranked.needs_scores() && self.ranking.scores.is_none() {
                    return Err(Error::config(format!(
                        "ranking mode {} needs ranking.scores",
                        self.ranking.mode
                    )));
                }
            }
            Stage::Encode => {}
            Stage::Generate => {
                inputs.push(("data.gold", gold()?));
                if self.generation.max_new_tokens == 0 {
                    return Err(Error::config("generation.max_new_tokens must be positive"));
                }
            }
            Stage::Evaluate => {
                inputs.push(("data.gold", gold()?));
                match &self.predictions {
                    Some(p) => inputs.push(("predictions", p)),
                    None if self.generation.endpoint.is_some() || self.generation.cache.is_some() => {}
                    None => {
                        return Err(Error::config(
                            "evaluate needs predictions, a generation endpoint or a generation cache",
                        ))
                    }
                }
                if let (None, Some(c)) = (&self.factuality.endpoint, &self.factuality.cache) {
                    inputs.push(("factuality.cache", c));
                }
                if let Some(a) = &self.factuality.annotations {
                    inputs.push(("factuality.annotations", a));
                }
            }
        }
        if matches!(stage, Stage::Encode | Stage::Generate | Stage::Evaluate) {
            if let (RankedConfig::RankedN { .. }, None) = (ranked, &self.ranking.scores) {
                return Err(Error::config("ranked_n needs ranking.scores"));
            }
        }
        if let Some(p) = &self.ranking.scores {
            inputs.push(("ranking.scores", p));
        }
        for (name, path) in inputs {
            if !path.exists() {
                return Err(Error::config(format!("{name}: {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}
