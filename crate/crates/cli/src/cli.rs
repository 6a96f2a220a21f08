//! Command-line surface.
//!
//! Exit codes: 0 success, 1 usage error, 2 pipeline failure, 3 backend or
//! credential failure.

use std::ffi::OsString;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use tracing_subscriber::EnvFilter;

use terminators_core::chunker::{ChunkStrategy, DEFAULT_MAX_CHUNK_LINES};
use terminators_core::parser::{extract_document, ExtractionConfig};
use terminators_core::planner::{plan_all, Jurisdiction, PlanOptions, Scenario, DEFAULT_MIN_CHECKS};
use terminators_core::remediation::{apply_verification, remediate_all, Resourcer, DEFAULT_MAX_ATTEMPTS};
use terminators_core::term::{validate_term, TermRecord, ValidateOptions};
use terminators_core::verifier::{verify_all, VerifyOptions};
use terminators_core::{
    Backend, BackendError, ChunkMode, DocumentFormat, FailurePolicy, SourceDocument, Term, TermStatus,
    VerificationResult,
};

use crate::cache::{CachedBackend, Offline, CACHE_VAR};
use crate::exec::{ThreadPool, DEFAULT_WORKERS};
use crate::live::{LiveBackend, LiveConfig};
use crate::pipeline::{self, DocumentInput, Phase, PipelineError, RunConfig};
use crate::report::{self, Format};
use crate::script::load_script;
use crate::store::MANIFEST;

const DEFAULT_FANOUT: u32 = 3;
const DEFAULT_RUNS_DIR: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "terminators", version, about = "Extract, verify and plan checks for terms-of-service clauses")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// `live`, `scripted:<script.json>` or `replay` (cache only).
    #[arg(long, global = true, default_value = "live")]
    pub backend: String,
    /// Response cache directory.
    #[arg(long, global = true, env = CACHE_VAR)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_WORKERS)]
    pub workers: usize,
    /// Record per-item failures and keep going instead of stopping.
    #[arg(long, global = true)]
    pub best_effort: bool,
    /// Output file; for `run` and `resume`, the directory holding runs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Live backend model (default from TERMINATORS_MODEL, then gpt-4o).
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Live backend chat-completions URL.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract terms from a document.
    Extract {
        file: PathBuf,
        #[command(flatten)]
        doc: DocArgs,
        #[command(flatten)]
        extraction: ExtractionArgs,
        /// Emit only `term`, `source` and `applicable_to` per term.
        #[arg(long)]
        paper_format: bool,
    },
    /// Verify terms against the lines they cite.
    Verify {
        terms_file: PathBuf,
        doc_file: PathBuf,
        #[command(flatten)]
        doc: DocArgs,
        #[command(flatten)]
        verify: VerifyArgs,
        /// Emit `{"terms", "verifications"}`, the input shape of `remediate`.
        #[arg(long)]
        bundle: bool,
    },
    /// Re-source or discard terms that did not verify.
    Remediate {
        /// `{"terms": [...], "verifications": [...]}` as written by `verify --bundle`.
        bundle_file: PathBuf,
        doc_file: PathBuf,
        #[command(flatten)]
        doc: DocArgs,
        #[command(flatten)]
        verify: VerifyArgs,
        #[command(flatten)]
        remediation: RemediationArgs,
    },
    /// Plan accountability checks for supported terms.
    Plan {
        /// A run directory, or a JSON file with a `terms` array (needs `--doc`).
        input: PathBuf,
        #[arg(long)]
        doc: Option<PathBuf>,
        #[command(flatten)]
        doc_args: DocArgs,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Run the whole pipeline on a document.
    Run {
        file: PathBuf,
        #[command(flatten)]
        doc: DocArgs,
        #[command(flatten)]
        extraction: ExtractionArgs,
        #[command(flatten)]
        verify: VerifyArgs,
        #[command(flatten)]
        remediation: RemediationArgs,
        #[command(flatten)]
        plan: PlanArgs,
        /// Stop once this phase is complete.
        #[arg(long)]
        stop_after: Option<Phase>,
    },
    /// Continue a stopped or failed run.
    Resume {
        /// Run directory, or a run id under `--out` (default `runs`).
        run: PathBuf,
        #[arg(long)]
        stop_after: Option<Phase>,
    },
    /// Render a report for a run.
    Report {
        run: PathBuf,
        #[arg(long, default_value = "audit_json")]
        format: Format,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DocArgs {
    /// Source name used in citations (default: the file name).
    #[arg(long)]
    pub name: Option<String>,
    /// Number of the document's first line.
    #[arg(long, default_value_t = 1)]
    pub line_offset: u32,
    /// plain, markdown or html (default: from the extension).
    #[arg(long)]
    pub format: Option<DocumentFormat>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractionArgs {
    /// whole, parallel, section or paragraph.
    #[arg(long, default_value = "section")]
    pub strategy: ChunkMode,
    #[arg(long)]
    pub max_chunk_lines: Option<u32>,
    /// Extraction replicas per chunk for `parallel`.
    #[arg(long)]
    pub fanout: Option<u32>,
    /// Restrict extraction to an aspect (repeatable).
    #[arg(long = "aspect")]
    pub aspects: Vec<String>,
    /// The provider's name, read as the provider party.
    #[arg(long)]
    pub provider_name: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Lexical-overlap score under which a citation is flagged.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub context_lines: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct RemediationArgs {
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u32,
    /// Propose replacement spans by lexical search instead of the backend.
    #[arg(long)]
    pub no_llm_resource: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// JSON `{description, persona?, jurisdiction?}` or plain-text description.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long)]
    pub persona: Option<String>,
    /// none, gdpr or ccpa.
    #[arg(long)]
    pub jurisdiction: Option<Jurisdiction>,
    #[arg(long, default_value_t = DEFAULT_MIN_CHECKS)]
    pub min_checks: u32,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Pipeline(e) if e.backend_error().is_some() => 3,
            CliError::Backend(_) => 3,
            CliError::Pipeline(_) | CliError::Failed(_) => 2,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.global.verbose);
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let exec = ThreadPool::new(
        NonZeroUsize::new(g.workers).ok_or_else(|| CliError::Usage("--workers must be at least 1".into()))?,
    );
    let policy = if g.best_effort { FailurePolicy::BestEffort } else { FailurePolicy::FailFast };
    match &cli.command {
        Command::Extract { file, doc, extraction, paper_format } => {
            let doc = doc_input(file, doc).load()?;
            let cfg = extraction_config(extraction)?;
            let backend = build_backend(g)?;
            let out = extract_document(&doc, &cfg, &backend, &exec, policy).map_err(PipelineError::from)?;
            for c in out.zero_term_chunks() {
                tracing::info!(start = c.start_line, end = c.end_line, "chunk produced no terms");
            }
            for f in &out.failures {
                tracing::warn!(chunk = %f.chunk_id, error = %f.error, "chunk extraction failed");
            }
            if *paper_format {
                emit_json(g, &out.terms.iter().map(Term::to_compact_record).collect::<Vec<_>>())
            } else {
                emit_json(g, &out.terms.iter().map(Term::to_record).collect::<Vec<_>>())
            }
        }
        Command::Verify { terms_file, doc_file, doc, verify, bundle } => {
            let doc = doc_input(doc_file, doc).load()?;
            let terms = load_terms(terms_file, &doc)?;
            let opts = verify_options(verify);
            let backend = build_backend(g)?;
            let mut kept = Vec::new();
            let mut results = Vec::new();
            for (term, r) in terms.iter().zip(verify_all(&terms, &doc, &backend, &opts, &exec)) {
                match r {
                    Ok(v) => {
                        kept.push(term);
                        results.push(v);
                    }
                    Err(e) if policy == FailurePolicy::FailFast => return Err(PipelineError::from(e).into()),
                    Err(e) => tracing::warn!(term = %e.term_id, error = %e.error, "verification failed; term left out"),
                }
            }
            if *bundle {
                let mut records = Vec::new();
                for (t, v) in kept.iter().zip(&results) {
                    let updated = if t.status == TermStatus::Extracted {
                        apply_verification(t, v).map_err(PipelineError::from)?
                    } else {
                        (*t).clone()
                    };
                    records.push(updated.to_record());
                }
                emit_json(g, &serde_json::json!({"terms": records, "verifications": results}))
            } else {
                emit_json(g, &results)
            }
        }
        Command::Remediate { bundle_file, doc_file, doc, verify, remediation } => {
            let doc = doc_input(doc_file, doc).load()?;
            let value = read_json(bundle_file)?;
            let terms = terms_from_value(&value, &doc, bundle_file)?;
            let verifications: Vec<VerificationResult> = value
                .get("verifications")
                .cloned()
                .map(serde_json::from_value)
                .transpose()
                .map_err(|e| failed(format!("{}: bad `verifications`: {e}", bundle_file.display())))?
                .ok_or_else(|| failed(format!("{}: missing `verifications` array", bundle_file.display())))?;
            let mut items = Vec::new();
            for t in terms {
                let v = verifications
                    .iter()
                    .find(|v| v.term_id == t.term_id)
                    .ok_or_else(|| failed(format!("term {} has no verification", t.term_id)))?;
                let t = if t.status == TermStatus::Extracted {
                    apply_verification(&t, v).map_err(PipelineError::from)?
                } else {
                    t
                };
                items.push((t, v.clone()));
            }
            let mut config = RunConfig { policy, verify: verify_options(verify), ..RunConfig::default() };
            apply_remediation_args(&mut config, remediation);
            let opts = config.remediation();
            let backend = build_backend(g)?;
            let mut terms = Vec::new();
            let mut outcomes = Vec::new();
            for ((t, _), r) in items.iter().zip(remediate_all(&items, &doc, &backend, &opts, &exec)) {
                match r {
                    Ok((o, updated)) => {
                        terms.push(updated.to_record());
                        outcomes.push(o);
                    }
                    Err(e) if policy == FailurePolicy::FailFast => return Err(PipelineError::from(e).into()),
                    Err(e) => {
                        tracing::warn!(term = %t.term_id, error = %e, "remediation failed; term discarded");
                        let mut d = t.clone();
                        d.status = TermStatus::Discarded;
                        terms.push(d.to_record());
                    }
                }
            }
            emit_json(g, &serde_json::json!({"terms": terms, "outcomes": outcomes}))
        }
        Command::Plan { input, doc, doc_args, plan } => {
            let (terms, document) = if input.join(MANIFEST).is_file() {
                let (run, _) = pipeline::load(input)?;
                (run.current_terms(), run.document)
            } else {
                let doc_path = doc
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("--doc is required unless the input is a run directory".into()))?;
                let document = doc_input(doc_path, doc_args).load()?;
                (load_terms(input, &document)?, document)
            };
            let scenario =
                scenario(plan)?.ok_or_else(|| CliError::Usage("--scenario-file is required for plan".into()))?;
            let opts = PlanOptions { min_checks: plan.min_checks, ..PlanOptions::default() };
            let backend = build_backend(g)?;
            let batch =
                plan_all(&terms, &document, &scenario, &backend, &opts, &exec, policy).map_err(PipelineError::from)?;
            for s in &batch.skipped {
                tracing::info!(term = %s.term_id, status = ?s.status, "not planned");
            }
            for f in &batch.failures {
                tracing::warn!(term = %f.term_id(), error = %f, "planning failed");
            }
            emit_json(g, &batch.plans)
        }
        Command::Run { file, doc, extraction, verify, remediation, plan, stop_after } => {
            let input = doc_input(file, doc);
            let mut config = RunConfig {
                extraction: extraction_config(extraction)?,
                verify: verify_options(verify),
                plan: PlanOptions { min_checks: plan.min_checks, ..PlanOptions::default() },
                scenario: scenario(plan)?,
                policy,
                ..RunConfig::default()
            };
            apply_remediation_args(&mut config, remediation);
            let backend = build_backend(g)?;
            let root = g.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_RUNS_DIR));
            let (mut run, mut store) = pipeline::start(&root, &input, config, backend.id())?;
            let result = pipeline::advance(&mut run, &mut store, &backend, &exec, *stop_after);
            println!("{}", store.dir().display());
            result?;
            tracing::info!(run = %run.manifest.run_id, phase = %run.phase(), "run finished");
            Ok(())
        }
        Command::Resume { run, stop_after } => {
            let dir = run_dir(g, run);
            let (mut audit, mut store) = pipeline::load(&dir)?;
            if audit.phase() == Phase::Complete {
                println!("{}", dir.display());
                return Ok(());
            }
            pipeline::check_document(&audit, &mut store)?;
            let backend = build_backend(g)?;
            let result = pipeline::advance(&mut audit, &mut store, &backend, &exec, *stop_after);
            println!("{}", dir.display());
            result.map_err(Into::into)
        }
        Command::Report { run, format } => {
            let (audit, _) = pipeline::load(&run_dir(g, run))?;
            let text = report::render(&audit, *format).map_err(failed)?;
            emit_text(g, &text)
        }
    }
}

fn run_dir(g: &GlobalArgs, run: &Path) -> PathBuf {
    if run.join(MANIFEST).is_file() {
        return run.to_owned();
    }
    let root = g.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_RUNS_DIR));
    let under = root.join(run);
    if under.join(MANIFEST).is_file() {
        under
    } else {
        run.to_owned()
    }
}

fn doc_input(path: &Path, args: &DocArgs) -> DocumentInput {
    let mut input = DocumentInput::from_path(path);
    if let Some(n) = &args.name {
        input.source_name = n.clone();
    }
    if let Some(f) = args.format {
        input.format = f;
    }
    input.first_line = args.line_offset;
    input
}

fn extraction_config(a: &ExtractionArgs) -> Result<ExtractionConfig, CliError> {
    let cap = a.max_chunk_lines.unwrap_or(DEFAULT_MAX_CHUNK_LINES);
    let strategy = match a.strategy {
        ChunkMode::WholeDocument => Ok(ChunkStrategy::whole_document()),
        ChunkMode::ParallelMerge => {
            ChunkStrategy::new(ChunkMode::ParallelMerge, u32::MAX, a.fanout.unwrap_or(DEFAULT_FANOUT))
        }
        mode => ChunkStrategy::new(mode, cap, 1),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = ExtractionConfig {
        aspects: a.aspects.clone(),
        strategy,
        provider_name: a.provider_name.clone(),
        ..ExtractionConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn verify_options(a: &VerifyArgs) -> VerifyOptions {
    let d = VerifyOptions::default();
    VerifyOptions {
        threshold: a.threshold.unwrap_or(d.threshold),
        context_lines: a.context_lines.unwrap_or(d.context_lines),
        ..d
    }
}

fn apply_remediation_args(config: &mut RunConfig, a: &RemediationArgs) {
    config.max_attempts = a.max_attempts;
    config.resourcer = if a.no_llm_resource { Resourcer::lexical() } else { Resourcer::Llm };
}

fn scenario(a: &PlanArgs) -> Result<Option<Scenario>, CliError> {
    let Some(path) = &a.scenario_file else {
        if a.persona.is_some() || a.jurisdiction.is_some() {
            return Err(CliError::Usage("--persona and --jurisdiction need --scenario-file".into()));
        }
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    let mut s = match serde_json::from_str::<Value>(&text) {
        Ok(v @ Value::Object(_)) => serde_json::from_value::<Scenario>(v)
            .map_err(|e| failed(format!("{}: bad scenario: {e}", path.display())))?,
        _ => Scenario::new(text.trim()).map_err(|e| failed(format!("{}: {e}", path.display())))?,
    };
    if s.description.trim().is_empty() {
        return Err(failed(format!("{}: scenario description is empty", path.display())));
    }
    if let Some(p) = &a.persona {
        s = s.with_persona(p.clone());
    }
    if let Some(j) = a.jurisdiction {
        s = s.with_jurisdiction(j);
    }
    Ok(Some(s))
}

fn build_backend(g: &GlobalArgs) -> Result<Box<dyn Backend>, CliError> {
    let cache = g.cache_dir.clone();
    let inner: Box<dyn Backend> = match g.backend.as_str() {
        "live" => Box::new(LiveBackend::new(LiveConfig::from_env(g.endpoint.clone(), g.model.clone())?)?),
        "replay" => {
            if cache.is_none() {
                return Err(CliError::Usage(format!("--backend replay needs --cache-dir or {CACHE_VAR}")));
            }
            Box::new(Offline)
        }
        other => match other.strip_prefix("scripted:") {
            Some(path) if !path.is_empty() => Box::new(load_script(Path::new(path)).map_err(failed)?),
            _ => return Err(CliError::Usage(format!("unknown backend `{other}` (live, scripted:<path>, replay)"))),
        },
    };
    Ok(match cache {
        Some(dir) => Box::new(CachedBackend::new(inner, dir)),
        None => inner,
    })
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| failed(format!("{}: not JSON: {e}", path.display())))
}

/// Terms from a JSON array or an object with a `terms` array. Entries with a
/// `status` field are full records; others are validated as fresh candidates.
fn load_terms(path: &Path, doc: &SourceDocument) -> Result<Vec<Term>, CliError> {
    terms_from_value(&read_json(path)?, doc, path)
}

fn terms_from_value(value: &Value, doc: &SourceDocument, path: &Path) -> Result<Vec<Term>, CliError> {
    let items = match value {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("terms")
            .and_then(Value::as_array)
            .ok_or_else(|| failed(format!("{}: no `terms` array", path.display())))?,
        _ => return Err(failed(format!("{}: expected an array of terms", path.display()))),
    };
    let opts = ValidateOptions::default();
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let term = if item.get("status").is_some() {
                serde_json::from_value::<TermRecord>(item.clone())
                    .map_err(|e| failed(format!("{}: term {i}: {e}", path.display())))?
                    .into_term()
            } else {
                validate_term(item, doc, &opts).map_err(|e| failed(format!("{}: term {i}: {e}", path.display())))?.term
            };
            if !doc.resolves(&term.source) {
                return Err(failed(format!(
                    "{}: term {i} cites {} which is not in the document",
                    path.display(),
                    term.source
                )));
            }
            Ok(term)
        })
        .collect()
}

fn emit_json<T: Serialize + ?Sized>(g: &GlobalArgs, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(failed)?;
    text.push('\n');
    emit_text(g, &text)
}

fn emit_text(g: &GlobalArgs, text: &str) -> Result<(), CliError> {
    match &g.out {
        Some(path) => std::fs::write(path, text).map_err(|e| failed(format!("{}: {e}", path.display()))),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(failed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("terminators").chain(args.iter().copied()))
    }

    #[test]
    fn verbs_and_global_flags_parse() {
        let cli =
            parse(&["run", "doc.txt", "--backend", "scripted:s.json", "--workers", "2", "--best-effort"]).unwrap();
        assert!(cli.global.best_effort);
        assert_eq!(cli.global.workers, 2);
        assert!(matches!(cli.command, Command::Run { .. }));
        let cli = parse(&["report", "runs/x", "--format", "paper_json"]).unwrap();
        assert!(matches!(cli.command, Command::Report { format: Format::PaperJson, .. }));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        assert!(parse(&["extract", "d.txt", "--strategy", "sideways"]).is_err());
        assert!(parse(&["report", "r", "--format", "pdf"]).is_err());
        assert!(parse(&["frobnicate"]).is_err());
        assert_eq!(main_with(["terminators", "frobnicate"]), 1);
        assert_eq!(main_with(["terminators", "--help"]), 0);
    }

    #[test]
    fn strategies_map_to_caps() {
        let args = |mode: ChunkMode| ExtractionArgs {
            strategy: mode,
            max_chunk_lines: Some(10),
            fanout: None,
            aspects: vec![],
            provider_name: None,
        };
        assert_eq!(
            extraction_config(&args(ChunkMode::WholeDocument)).unwrap().strategy,
            ChunkStrategy::whole_document()
        );
        let p = extraction_config(&args(ChunkMode::ParallelMerge)).unwrap().strategy;
        assert_eq!((p.max_chunk_lines(), p.parallel_fanout()), (u32::MAX, DEFAULT_FANOUT));
        assert_eq!(extraction_config(&args(ChunkMode::Paragraph)).unwrap().strategy.max_chunk_lines(), 10);
        let mut zero = args(ChunkMode::Paragraph);
        zero.max_chunk_lines = Some(0);
        assert!(matches!(extraction_config(&zero), Err(CliError::Usage(_))));
    }

    #[test]
    fn replay_without_cache_is_usage() {
        let cli = parse(&["extract", "d.txt", "--backend", "replay"]).unwrap();
        let mut g = cli.global;
        g.cache_dir = None;
        assert!(matches!(build_backend(&g), Err(CliError::Usage(_))));
        g.backend = "bogus".into();
        assert!(matches!(build_backend(&g), Err(CliError::Usage(_))));
    }
}
