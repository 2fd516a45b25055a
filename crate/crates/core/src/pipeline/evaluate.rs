use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::commands::{load_examples, passage_counts, ranking_provider, run_generation};
use super::manifest::{write_json, RunManifest};
use super::{PipelineConfig, Stage};
use crate::error::{Error, Result};
use crate::factuality::{
    evaluate_factuality, human_agreement, load_annotations, Agreement, CachedNli, FactualityConfig,
    FactualityInput, FactualityReport, HttpNliClient, NliBackend, VerdictCache,
};
use crate::inference::{load_predictions, GenerationRecord};
use crate::metrics::{score_corpus, MetricConfig, MetricItem, MetricReport};
use crate::ranking::{ranking_agreement, RankedConfig, RankingProvider, RankingQualityReport};
use crate::seqcodec::complete_ranking;

pub const EVALUATION_FILE: &str = "evaluation.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_MD: &str = "metrics.md";

/// How many gold examples had a prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub gold: usize,
    pub covered: usize,
    pub missing: usize,
    /// Up to the first 20 missing ids, in gold order.
    pub missing_ids: Vec<String>,
    /// Predictions whose id is not in the gold set.
    pub unknown_predictions: usize,
    pub duplicate_predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tool_version: String,
    pub metrics: MetricReport,
    pub factuality: Option<FactualityReport>,
    pub agreement: Option<Agreement>,
    pub ranking: RankingQualityReport,
    pub coverage: Coverage,
    pub metric_config: MetricConfig,
    pub notes: Vec<String>,
}

const MISSING_ID_LIMIT: usize = 20;

fn nli_backend(cfg: &PipelineConfig) -> Result<Option<Box<dyn NliBackend>>> {
    let f = &cfg.factuality;
    let timeout = Duration::from_millis(f.timeout_ms);
    Ok(match (&f.endpoint, &f.cache) {
        (Some(url), Some(path)) => Some(Box::new(CachedNli::new(
            VerdictCache::open(path)?,
            HttpNliClient::new(url, cfg.retry, timeout),
        ))),
        (Some(url), None) => Some(Box::new(HttpNliClient::new(url, cfg.retry, timeout))),
        (None, Some(path)) => Some(Box::new(VerdictCache::open_read_only(path)?)),
        (None, None) => None,
    })
}

/// Scores predictions against the gold set and writes `evaluation.json`,
/// `metrics.csv`, `metrics.md` and `evaluate.manifest.json`.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<(EvaluationReport, RunManifest)> {
    cfg.validate(Stage::Evaluate)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::input(&cfg.out_dir, e))?;
    let mut m = RunManifest::new("evaluate", cfg)?;
    let mut notes = Vec::new();

    let gold_path = cfg.data.gold.as_deref().expect("validated");
    m.add_input(gold_path)?;
    let gold = m.time("load_gold", |_| load_examples(gold_path))?;
    m.count("gold", gold.len());
    let mode = cfg.ranking.ranked_config()?;
    let provider = ranking_provider(cfg, false)?;
    if let Some(p) = &cfg.ranking.scores {
        m.add_input(p)?;
    }
    let mut arrangements = HashMap::with_capacity(gold.len());
    for ex in &gold {
        let arrangement = provider.arrange(ex)?;
        if arrangements.insert(ex.query_id.clone(), arrangement).is_some() {
            return Err(Error::Data(format!("duplicate gold query id {}", ex.query_id)));
        }
    }

    let (records, duplicates): (Vec<GenerationRecord>, usize) = match &cfg.predictions {
        Some(path) => {
            m.add_input(path)?;
            let loaded = load_predictions(path, passage_counts(&arrangements))?;
            (loaded.records, loaded.duplicates.len())
        }
        None => match run_generation(cfg, &gold, &provider, &mut m) {
            Ok(r) => (r, 0),
            Err((_, e)) => return Err(e),
        },
    };
    m.count("predictions", records.len());

    let by_id: HashMap<&str, &GenerationRecord> =
        records.iter().map(|r| (r.query_id.as_str(), r)).collect();
    let unknown = records
        .iter()
        .filter(|r| !arrangements.contains_key(&r.query_id))
        .count();
    let covered: Vec<_> = gold
        .iter()
        .filter_map(|ex| by_id.get(ex.query_id.as_str()).map(|r| (ex, *r)))
        .collect();
    let missing_ids: Vec<String> = gold
        .iter()
        .filter(|ex| !by_id.contains_key(ex.query_id.as_str()))
        .map(|ex| ex.query_id.clone())
        .collect();
    let coverage = Coverage {
        gold: gold.len(),
        covered: covered.len(),
        missing: missing_ids.len(),
        missing_ids: missing_ids.iter().take(MISSING_ID_LIMIT).cloned().collect(),
        unknown_predictions: unknown,
        duplicate_predictions: duplicates,
    };
    if covered.is_empty() {
        return Err(Error::Data(format!(
            "zero coverage: none of the {} gold examples has a prediction",
            gold.len()
        )));
    }
    if coverage.missing > 0 {
        m.warn(format!(
            "coverage: {} of {} gold examples have no prediction",
            coverage.missing, coverage.gold
        ));
    }
    if unknown > 0 {
        m.warn(format!("{unknown} predictions do not match any gold example"));
    }
    m.count("evaluated", covered.len());

    let items: Vec<MetricItem> = covered
        .iter()
        .map(|(ex, r)| MetricItem {
            candidate: r.parsed.answer.clone(),
            references: ex.references().to_vec(),
            gold_answerable: ex.answerable,
            predicted_answerable: !r.parsed.is_no_answer,
        })
        .collect();
    let metrics = m.time("metrics", |_| score_corpus(&items, &cfg.metrics))?;

    let mut pairs = Vec::with_capacity(covered.len());
    let mut taus = Vec::new();
    let has_reference_ranking = mode == RankedConfig::EndToEnd && cfg.ranking.scores.is_some();
    for (ex, r) in &covered {
        let a = &arrangements[&ex.query_id];
        let predicted = complete_ranking(&r.parsed.ranking, a.passages.len());
        if has_reference_ranking {
            taus.push(ranking_agreement(&predicted, &a.target_ranking)?);
        }
        pairs.push((predicted, a.gold()));
    }
    let ranking = RankingQualityReport::build(&pairs, &taus);

    let nli = nli_backend(cfg)?;
    if let Some(p) = cfg.factuality.cache.as_deref().filter(|p| p.exists()) {
        m.add_input(p)?;
    }
    let factuality = match &nli {
        Some(nli) => {
            let inputs: Vec<FactualityInput> = covered
                .iter()
                .map(|(ex, r)| FactualityInput {
                    query_id: ex.query_id.clone(),
                    generated: r.parsed.answer.clone(),
                    passages: arrangements[&ex.query_id].texts(),
                    gold_answers: ex.references().to_vec(),
                    predicted_no_answer: r.parsed.is_no_answer,
                    gold_answerable: ex.answerable,
                })
                .collect();
            let fcfg = FactualityConfig {
                premise_mode: cfg.factuality.premise_mode,
                max_in_flight: cfg.factuality.max_in_flight,
            };
            Some(m.time("factuality", |_| evaluate_factuality(&inputs, nli.as_ref(), &fcfg))?)
        }
        None => {
            notes.push("factuality skipped: no NLI endpoint or verdict cache configured".to_string());
            None
        }
    };

    let agreement = match (&cfg.factuality.annotations, &factuality) {
        (Some(path), Some(f)) => {
            m.add_input(path)?;
            Some(human_agreement(&f.per_example, &load_annotations(path)?)?)
        }
        (Some(_), None) => {
            notes.push("human agreement skipped: factuality was not evaluated".to_string());
            None
        }
        _ => None,
    };
    if cfg.metrics.meteor.stem {
        notes.push("METEOR uses exact and Porter-stem matching only; no synonym stage".to_string());
    }

    let report = EvaluationReport {
        tool_version: crate::TOOL_VERSION.to_string(),
        metrics,
        factuality,
        agreement,
        ranking,
        coverage,
        metric_config: cfg.metrics.clone(),
        notes,
    };
    write_json(&cfg.out_dir.join(EVALUATION_FILE), &report)?;
    let rows = [ReportRow::from_report("run", &report)];
    std::fs::write(cfg.out_dir.join(METRICS_CSV), render_csv(&rows))?;
    std::fs::write(cfg.out_dir.join(METRICS_MD), render_markdown(&rows))?;
    m.write(&cfg.out_dir)?;
    Ok((report, m))
}

/// One line of the results table. All values are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub b1: Option<f64>,
    pub b4: Option<f64>,
    pub meteor: Option<f64>,
    pub rouge_l: Option<f64>,
    pub n_p: Option<f64>,
    pub n_a: Option<f64>,
    pub f1: Option<f64>,
}

impl ReportRow {
    pub fn from_report(label: &str, r: &EvaluationReport) -> Self {
        Self {
            label: label.to_string(),
            b1: r.metrics.b1,
            b4: r.metrics.b4,
            meteor: r.metrics.meteor,
            rouge_l: r.metrics.rouge_l,
            n_p: r.factuality.as_ref().and_then(|f| f.n_p_rate),
            n_a: r.factuality.as_ref().and_then(|f| f.n_a_rate),
            f1: Some(r.metrics.answerability_f1),
        }
    }

    fn cells(&self) -> [Option<f64>; 7] {
        [self.b1, self.b4, self.meteor, self.rouge_l, self.n_p, self.n_a, self.f1]
    }
}

const COLUMNS: [&str; 7] = ["B-1", "B-4", "M", "R-L", "N-P", "N-A", "F1"];

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_default()
}

pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = format!("run,{}\n", COLUMNS.join(","));
    for r in rows {
        let cells: Vec<String> = r.cells().into_iter().map(cell).collect();
        let _ = writeln!(out, "{},{}", r.label, cells.join(","));
    }
    out
}

pub fn render_markdown(rows: &[ReportRow]) -> String {
    let mut out = format!("| run | {} |\n", COLUMNS.join(" | "));
    out.push_str("|---|");
    out.push_str(&"---:|".repeat(COLUMNS.len()));
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r
            .cells()
            .into_iter()
            .map(|v| if v.is_some() { cell(v) } else { "-".into() })
            .collect();
        let _ = writeln!(out, "| {} | {} |", r.label, cells.join(" | "));
    }
    out
}

/// Collects `evaluation.json` from each run directory into one table.
/// Rows are labelled by directory name. Returns (markdown, csv).
pub fn cmd_report(runs: &[PathBuf]) -> Result<(String, String)> {
    if runs.is_empty() {
        return Err(Error::arg("report needs at least one run directory"));
    }
    let mut rows = Vec::with_capacity(runs.len());
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    for dir in runs {
        let path = if dir.is_dir() { dir.join(EVALUATION_FILE) } else { dir.clone() };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::input(&path, e))?;
        let report: EvaluationReport = serde_json::from_str(&text)
            .map_err(|e| Error::record(&path, e.line(), "<report>", e.to_string()))?;
        let mut label = run_label(dir);
        let seen = labels.entry(label.clone()).or_insert(0);
        *seen += 1;
        if *seen > 1 {
            label = format!("{label}#{seen}");
        }
        rows.push(ReportRow::from_report(&label, &report));
    }
    Ok((render_markdown(&rows), render_csv(&rows)))
}

fn run_label(path: &Path) -> String {
    let dir = if path.is_dir() { path } else { path.parent().unwrap_or(path) };
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}
