//! Command-line interface for the evograph pipeline.
//!
//! Exit codes: 0 on success, 1 when a batch aborts or input data is
//! invalid, 2 on configuration errors (clap uses 2 for usage errors too).

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use evograph::adapters::Backends;
use evograph::config::{BackendKind, PipelineConfig};
use evograph::pipeline::metrics::{
    delta_precision, dhp, static_prf, CanonTriple, Judgments, MetricResult,
};
use evograph::pipeline::{
    inspect_entity, load_batch_file, process_batch, run_stream, BatchReport, PipelineError,
    StateDir,
};
use evograph::{GraphState, Mkb};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Http,
}

#[derive(Parser)]
#[command(
    name = "evograph",
    about = "Incremental knowledge-graph construction with lifecycle governance",
    version
)]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory holding persisted state, reports, and exports.
    #[arg(long, global = true, default_value = "state")]
    state_dir: PathBuf,

    /// Generation/judging/embedding backend family.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,

    /// Disable evolution-intent assessment (nothing is ever deprecated).
    #[arg(long, global = true)]
    no_intent: bool,

    /// Disable the event track (route everything to triples).
    #[arg(long, global = true)]
    no_events: bool,

    /// Disable cross-batch coreference alignment.
    #[arg(long, global = true)]
    no_coref: bool,

    /// Top-K schemas retrieved into the extraction context.
    #[arg(long, global = true)]
    k: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a batch file without touching any state.
    Ingest {
        /// Line-delimited JSON documents ({"doc_id","text","window","timestamp"?}).
        input: PathBuf,
    },
    /// Process one batch against the saved state.
    Run { input: PathBuf },
    /// Process an ordered list of window files, persisting between windows.
    Stream { inputs: Vec<PathBuf> },
    /// Compute Δ-Precision and D-HP from a report and a judgments file;
    /// optionally static P/R/F1 against a gold triple file.
    Score {
        report: PathBuf,
        judgments: PathBuf,
        /// Gold triples (line-delimited {"head","relation","tail"}) scored
        /// against the saved graph's active facts.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Write the graph and MKB export files from the saved state.
    Export {
        /// Graph export destination (defaults into the state dir).
        #[arg(long)]
        graph: Option<PathBuf>,
        /// MKB export destination (defaults into the state dir).
        #[arg(long)]
        mkb: Option<PathBuf>,
    },
    /// Show an entity's history (facts, profile, deprecation log) or one
    /// edge record.
    Inspect {
        #[arg(long, conflicts_with = "edge")]
        entity: Option<String>,
        #[arg(long)]
        edge: Option<String>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(backend) = cli.backend {
        cfg.backend.kind = match backend {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Http => BackendKind::Http,
        };
    }
    if cli.no_intent {
        cfg.ablation.disable_intent = true;
    }
    if cli.no_events {
        cfg.ablation.disable_events = true;
    }
    if cli.no_coref {
        cfg.ablation.disable_cross_batch_coref = true;
    }
    if let Some(k) = cli.k {
        cfg.thresholds.retrieval_k = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Print to stdout, exiting quietly when the consumer closed the pipe
/// (`evograph inspect ... | head`).
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{text}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}

fn print_summary(report: &BatchReport) {
    println!(
        "window {}: +{} facts, {} re-asserted, {} deprecated, {} rejected, {} pending, {} conflicts, {} schemas promoted",
        report.batch_index,
        report.additions.len(),
        report.reasserted.len(),
        report.deprecations.len(),
        report.rejected.len(),
        report.pending.len(),
        report.conflicts.len(),
        report.schemas_promoted.len(),
    );
    for (stage, us) in &report.timings_us {
        eprintln!("  {stage}: {:.1} ms", *us as f64 / 1000.0);
    }
}

fn load_state(state: &StateDir) -> anyhow::Result<(GraphState, Mkb)> {
    state.load().context("loading saved state")
}

fn cmd_ingest(input: &Path) -> anyhow::Result<()> {
    let batch = load_batch_file(input)?;
    let statements: usize = batch
        .docs
        .iter()
        .map(|d| evograph::extract::segment(d).len())
        .sum();
    println!(
        "ok: {} documents, window {}, {} statements",
        batch.docs.len(),
        batch.window,
        statements
    );
    Ok(())
}

fn cmd_run(cli: &Cli, input: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load_config(cli)?;
    let backends = Backends::from_config(&cfg)?;
    let state = StateDir::new(&cli.state_dir);
    let (graph, mkb) = load_state(&state)?;
    let batch = load_batch_file(input)?;
    match process_batch(&batch, &graph, &mkb, &cfg, &backends, None) {
        Ok(outcome) => {
            state.write_report(&outcome.report)?;
            state.save(&outcome.graph, &outcome.mkb)?;
            print_summary(&outcome.report);
            Ok(ExitCode::SUCCESS)
        }
        Err(aborted) => {
            let _ = state.write_report(&aborted.report);
            eprintln!("batch aborted: {}", aborted.error);
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_stream(cli: &Cli, inputs: &[PathBuf]) -> anyhow::Result<ExitCode> {
    if inputs.is_empty() {
        anyhow::bail!("stream requires at least one window file");
    }
    let cfg = load_config(cli)?;
    let backends = Backends::from_config(&cfg)?;
    let state = StateDir::new(&cli.state_dir);
    match run_stream(inputs, &state, &cfg, &backends) {
        Ok(reports) => {
            for report in &reports {
                print_summary(report);
            }
            println!("exports written to {}", state.root.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(aborted) => {
            eprintln!(
                "stream aborted at window {}: {}",
                aborted.report.batch_index, aborted.error
            );
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_score(
    cli: &Cli,
    report_path: &Path,
    judgments_path: &Path,
    gold: Option<&PathBuf>,
) -> anyhow::Result<()> {
    let report_text = std::fs::read_to_string(report_path)
        .with_context(|| format!("reading {}", report_path.display()))?;
    let report = BatchReport::from_json(&report_text).context("parsing report")?;
    let judgments_text = std::fs::read_to_string(judgments_path)
        .with_context(|| format!("reading {}", judgments_path.display()))?;
    let judgments = Judgments::parse(&judgments_text)?;

    let mut result = MetricResult {
        delta_precision: delta_precision(&report, &judgments)?.delta_precision,
        dhp: dhp(&report, &judgments)?.dhp,
        ..Default::default()
    };

    if let Some(gold_path) = gold {
        let state = StateDir::new(&cli.state_dir);
        let (graph, _) = load_state(&state)?;
        let name_of = |id: &evograph::ids::EntityId| {
            graph
                .entity(id)
                .map_or_else(|| id.as_str().to_string(), |n| n.canonical_name.clone())
        };
        let predicted: Vec<CanonTriple> = graph
            .edges
            .values()
            .filter(|e| e.is_active())
            .map(|e| {
                let tail = match &e.tail {
                    evograph::graph::TailRef::Entity(id) => name_of(id),
                    evograph::graph::TailRef::Literal(l) => l.clone(),
                };
                CanonTriple::new(&name_of(&e.head), &e.relation, &tail)
            })
            .collect();
        let gold_text = std::fs::read_to_string(gold_path)
            .with_context(|| format!("reading {}", gold_path.display()))?;
        let mut gold_triples = Vec::new();
        for (lineno, line) in gold_text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(line)
                .with_context(|| format!("gold line {}", lineno + 1))?;
            let field = |k: &str| value.get(k).and_then(|v| v.as_str()).unwrap_or_default();
            gold_triples.push(CanonTriple::new(field("head"), field("relation"), field("tail")));
        }
        let prf = static_prf(&predicted, &gold_triples);
        result.precision = prf.precision;
        result.recall = prf.recall;
        result.f1 = prf.f1;
    }

    let value = serde_json::to_value(&result)?;
    emit(&serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn cmd_export(
    cli: &Cli,
    graph_out: Option<&PathBuf>,
    mkb_out: Option<&PathBuf>,
) -> anyhow::Result<()> {
    let state = StateDir::new(&cli.state_dir);
    let (graph, mkb) = load_state(&state)?;
    let graph_path = graph_out.cloned().unwrap_or_else(|| state.graph_export_path());
    let mkb_path = mkb_out.cloned().unwrap_or_else(|| state.mkb_export_path());
    std::fs::write(&graph_path, graph.export())
        .with_context(|| format!("writing {}", graph_path.display()))?;
    std::fs::write(&mkb_path, mkb.snapshot())
        .with_context(|| format!("writing {}", mkb_path.display()))?;
    println!("graph export: {}", graph_path.display());
    println!("mkb export:   {}", mkb_path.display());
    Ok(())
}

fn cmd_inspect(cli: &Cli, entity: Option<&str>, edge: Option<&str>) -> anyhow::Result<ExitCode> {
    let state = StateDir::new(&cli.state_dir);
    let (graph, mkb) = load_state(&state)?;
    if let Some(query) = entity {
        match inspect_entity(&graph, &mkb, query) {
            Some(history) => {
                emit(&serde_json::to_string_pretty(&serde_json::to_value(&history)?)?);
                Ok(ExitCode::SUCCESS)
            }
            None => {
                eprintln!("no entity matches `{query}`");
                Ok(ExitCode::from(1))
            }
        }
    } else if let Some(id) = edge {
        match graph.edge(&evograph::ids::EdgeId::from(id)) {
            Some(edge) => {
                let mut value = serde_json::to_value(edge)?;
                let log: Vec<_> = graph
                    .deprecation_log
                    .iter()
                    .filter(|r| r.edge_id.as_str() == id)
                    .collect();
                value["deprecation_log"] = serde_json::to_value(log)?;
                emit(&serde_json::to_string_pretty(&value)?);
                Ok(ExitCode::SUCCESS)
            }
            None => {
                eprintln!("no edge with id `{id}`");
                Ok(ExitCode::from(1))
            }
        }
    } else {
        anyhow::bail!("inspect requires --entity or --edge");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> anyhow::Result<ExitCode> {
        match &cli.command {
            Command::Ingest { input } => {
                cmd_ingest(input)?;
                Ok(ExitCode::SUCCESS)
            }
            Command::Run { input } => cmd_run(&cli, input),
            Command::Stream { inputs } => cmd_stream(&cli, inputs),
            Command::Score { report, judgments, gold } => {
                cmd_score(&cli, report, judgments, gold.as_ref())?;
                Ok(ExitCode::SUCCESS)
            }
            Command::Export { graph, mkb } => {
                cmd_export(&cli, graph.as_ref(), mkb.as_ref())?;
                Ok(ExitCode::SUCCESS)
            }
            Command::Inspect { entity, edge } => {
                cmd_inspect(&cli, entity.as_deref(), edge.as_deref())
            }
        }
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_config = e
                .downcast_ref::<PipelineError>()
                .is_some_and(|p| matches!(p, PipelineError::Config(_)))
                || e.downcast_ref::<evograph::config::ConfigError>().is_some();
            if is_config {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
