use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use genqa_core::dataset::Subset;
use genqa_core::pipeline::{self, LineReport, Overrides, PipelineConfig, ReportRow, RunManifest};
use genqa_core::seqcodec::StyleTag;
use tracing_subscriber::EnvFilter;

/// Generative QA pipeline: data preparation, sequence encoding, generation and evaluation.
#[derive(Debug, Parser)]
#[command(name = "genqa", version, about)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// MS MARCO subset: all, answerable or nlgen.
    #[arg(long, global = true)]
    subset: Option<Subset>,

    /// Passage ranking mode: no_ranking, ranked_n or end_to_end.
    #[arg(long, global = true)]
    mode: Option<String>,

    /// Number of passages kept by ranked_n.
    #[arg(long, global = true)]
    top_n: Option<usize>,

    /// Predictions file for evaluate.
    #[arg(long, global = true)]
    predictions: Option<PathBuf>,

    /// NLI verdict cache file.
    #[arg(long, global = true)]
    nli_cache: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert raw datasets into canonical JSONL.
    Ingest,
    /// Mix canonical datasets into one training corpus.
    BuildCorpus,
    /// Encode canonical examples into source and target sequences.
    Encode {
        /// Canonical JSONL input; stdin when omitted.
        input: Option<PathBuf>,
        #[arg(long, default_value = "conv")]
        style: StyleTag,
        /// Emit token segments instead of flat strings.
        #[arg(long)]
        segments: bool,
    },
    /// Parse generated target strings into ranking and answer.
    Parse {
        /// Input with one generated string per line; stdin when omitted.
        input: Option<PathBuf>,
        #[arg(long)]
        n_passages: usize,
        /// Input lines are JSON objects with `query_id` and `raw`.
        #[arg(long)]
        jsonl: bool,
    },
    /// Run generation through the configured backend.
    Generate,
    /// Score predictions against gold answers.
    Evaluate,
    /// Collect evaluation results from several runs into one table.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also write report.md and report.csv into this directory.
        #[arg(long = "to")]
        to: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .with_ansi(io::stderr().is_terminal())
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render_error(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Error chain on one line, skipping causes already quoted by their parent.
fn render_error(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    let mut last = out.clone();
    for cause in e.chain().skip(1) {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            out.push_str(": ");
            out.push_str(&msg);
        }
        last = msg;
    }
    out
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use genqa_core::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::Argument(_) | E::Config(_)) => 1,
        Some(E::Backend(_) | E::Evaluation { .. } | E::Generation { .. }) => 3,
        Some(_) => 2,
        None if e.downcast_ref::<io::Error>().is_some() => 2,
        None => 1,
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(Overrides {
        subset: cli.subset,
        mode: cli.mode.clone(),
        top_n: cli.top_n,
        predictions: cli.predictions.clone(),
        nli_cache: cli.nli_cache.clone(),
        out: cli.out.clone(),
        seed: cli.seed,
    })?;
    Ok(cfg)
}

fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(
            File::open(p).map_err(|e| genqa_core::Error::Input { path: p.to_path_buf(), source: e })?,
        )),
        None => Box::new(io::stdin().lock()),
    })
}

fn summarize(m: &RunManifest) {
    for (name, n) in &m.row_counts {
        tracing::info!(rows = n, "{name}");
    }
}

fn line_report(r: &LineReport) -> Result<()> {
    if r.failed.is_empty() {
        return Ok(());
    }
    tracing::warn!(ok = r.ok, failed = r.failed.len(), "some input lines were skipped");
    if r.ok == 0 {
        return Err(genqa_core::Error::Data(format!("all {} input lines failed", r.failed.len())).into());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Ingest => summarize(&pipeline::cmd_ingest(&cfg)?),
        Command::BuildCorpus => summarize(&pipeline::cmd_build_corpus(&cfg)?),
        Command::Generate => summarize(&pipeline::cmd_generate(&cfg)?),
        Command::Encode { input, style, segments } => {
            let out = BufWriter::new(io::stdout().lock());
            let r = pipeline::cmd_encode(&cfg, open_input(input.as_deref())?, out, style, segments)?;
            line_report(&r)?;
        }
        Command::Parse { input, n_passages, jsonl } => {
            let out = BufWriter::new(io::stdout().lock());
            let r = pipeline::cmd_parse(open_input(input.as_deref())?, out, n_passages, jsonl)?;
            line_report(&r)?;
        }
        Command::Evaluate => {
            let (report, manifest) = pipeline::cmd_evaluate(&cfg)?;
            for w in &manifest.warnings {
                tracing::warn!("{w}");
            }
            let row = ReportRow::from_report("run", &report);
            print!("{}", pipeline::render_markdown(&[row]));
            tracing::info!(dir = %cfg.out_dir.display(), "evaluation written");
        }
        Command::Report { runs, to } => {
            let (md, csv) = pipeline::cmd_report(&runs)?;
            if let Some(dir) = to {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                std::fs::write(dir.join("report.md"), &md)?;
                std::fs::write(dir.join("report.csv"), &csv)?;
            }
            io::stdout().write_all(md.as_bytes())?;
        }
    }
    Ok(())
}
