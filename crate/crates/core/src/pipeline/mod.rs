//! Pipeline commands: ingest, build-corpus, encode, parse, generate,
//! evaluate and report. Each command takes a [`PipelineConfig`] and leaves
//! a [`RunManifest`] in the output directory.

mod commands;
mod config;
mod evaluate;
mod manifest;

pub use commands::{
    cmd_build_corpus, cmd_encode, cmd_generate, cmd_ingest, cmd_parse, EncodedRecord, LineReport,
    ParsedRecord, SegmentedRecord, PREDICTIONS_FILE,
};
pub use config::{
    CorpusConfig, CorpusSourceConfig, DataConfig, FactualitySettings, GenerationConfig,
    NarrativeQaPaths, Overrides, PipelineConfig, RankingConfig, Stage,
};
pub use evaluate::{
    cmd_evaluate, cmd_report, render_csv, render_markdown, Coverage, EvaluationReport, ReportRow,
    EVALUATION_FILE, METRICS_CSV, METRICS_MD,
};
pub use manifest::{file_digest, RunManifest, StageTiming};
