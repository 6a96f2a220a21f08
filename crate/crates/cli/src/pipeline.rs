//! End-to-end audit runs: ingest, extract, verify, remediate, plan.
//!
//! Each phase reads the previous phase's persisted output and writes its own,
//! so a run that stops (by request or on failure) resumes from the first
//! missing phase. Phases run one after another; items within a phase go
//! through the caller's executor.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use terminators_core::document::ingest_with_offset;
use terminators_core::parser::{extract_document, ChunkCoverage, ExtractError, ExtractionConfig, Rejection};
use terminators_core::planner::{plan_all, AccountabilityPlan, PlanError, PlanOptions, Scenario, SkipNotice};
use terminators_core::remediation::{
    apply_verification, discard_unverified, remediate_all, LifecycleError, RemediationError, RemediationOptions,
    RemediationOutcome, Resourcer, DEFAULT_MAX_ATTEMPTS,
};
use terminators_core::term::TermRecord;
use terminators_core::verifier::{verify_all, VerifyError, VerifyOptions};
use terminators_core::{
    sha256_hex, Backend, BackendError, DocumentFormat, Executor, FailurePolicy, IngestError, SourceDocument, Term,
    TermStatus, VerificationResult,
};

use crate::report;
use crate::store::{RunStore, StoreError, DOCUMENT, MANIFEST};

pub const EXTRACTED: &str = "extracted.json";
pub const VERIFIED: &str = "verified.json";
pub const REMEDIATED: &str = "remediated.json";
pub const PLANS: &str = "plans.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Ingested,
    Extracted,
    Verified,
    Remediated,
    Planned,
    Complete,
}

impl Phase {
    pub const ALL: [Phase; 6] =
        [Phase::Ingested, Phase::Extracted, Phase::Verified, Phase::Remediated, Phase::Planned, Phase::Complete];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Ingested => "ingested",
            Phase::Extracted => "extracted",
            Phase::Verified => "verified",
            Phase::Remediated => "remediated",
            Phase::Planned => "planned",
            Phase::Complete => "complete",
        }
    }

    fn next(self) -> Option<Phase> {
        Phase::ALL.iter().copied().find(|p| *p > self)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Phase::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s || (s == "extract" && *p == Phase::Extracted))
            .or(match s {
                "verify" => Some(Phase::Verified),
                "remediate" => Some(Phase::Remediated),
                "plan" => Some(Phase::Planned),
                _ => None,
            })
            .ok_or_else(|| format!("unknown phase `{s}`"))
    }
}

/// Everything that shapes a run's output apart from the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub extraction: ExtractionConfig,
    pub verify: VerifyOptions,
    pub max_attempts: u32,
    pub resourcer: Resourcer,
    pub plan: PlanOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub policy: FailurePolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            extraction: ExtractionConfig::default(),
            verify: VerifyOptions::default(),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            resourcer: Resourcer::Llm,
            plan: PlanOptions::default(),
            scenario: None,
            policy: FailurePolicy::FailFast,
        }
    }
}

impl RunConfig {
    pub fn remediation(&self) -> RemediationOptions {
        RemediationOptions {
            max_attempts: self.max_attempts,
            resourcer: self.resourcer,
            verify: self.verify,
            policy: self.policy,
        }
    }
}

/// Where a run's document comes from and how to read it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentInput {
    pub path: PathBuf,
    pub source_name: String,
    pub format: DocumentFormat,
    pub first_line: u32,
}

impl DocumentInput {
    /// Source name defaults to the file name; format to the extension.
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let source_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("document.txt").to_owned();
        let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("html" | "htm") => DocumentFormat::Html,
            Some("md" | "markdown") => DocumentFormat::Markdown,
            _ => DocumentFormat::Plain,
        };
        DocumentInput { path, source_name, format, first_line: 1 }
    }

    pub fn load(&self) -> Result<SourceDocument, PipelineError> {
        let raw =
            std::fs::read(&self.path).map_err(|source| PipelineError::Read { path: self.path.clone(), source })?;
        ingest_with_offset(&raw, &self.source_name, Some(self.format), self.first_line)
            .map_err(|source| PipelineError::Ingest { path: self.path.clone(), source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentInfo {
    pub source_name: String,
    pub doc_id: String,
    pub fingerprint: String,
    pub first_line: u32,
    pub line_count: usize,
    pub format: DocumentFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub document: DocumentInfo,
    /// Absolute path of the original input, used to detect edits on resume.
    pub source_path: PathBuf,
    pub backend_id: String,
    pub config: RunConfig,
    pub phase: Phase,
}

/// A per-item failure recorded under `--best-effort`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureNote {
    pub item: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedPhase {
    pub terms: Vec<TermRecord>,
    pub coverage: Vec<ChunkCoverage>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
    pub failures: Vec<FailureNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedItem {
    pub term_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<VerificationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedPhase {
    pub results: Vec<VerifiedItem>,
    pub terms: Vec<TermRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemediatedPhase {
    pub outcomes: Vec<RemediationOutcome>,
    pub terms: Vec<TermRecord>,
    pub failures: Vec<FailureNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPhase {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_fingerprint: Option<String>,
    pub plans: Vec<AccountabilityPlan>,
    pub skipped: Vec<SkipNotice>,
    pub failures: Vec<FailureNote>,
}

/// A run in memory: manifest, document and every completed phase's output.
#[derive(Debug, Clone)]
pub struct AuditRun {
    pub manifest: Manifest,
    pub document: SourceDocument,
    pub extracted: Option<ExtractedPhase>,
    pub verified: Option<VerifiedPhase>,
    pub remediated: Option<RemediatedPhase>,
    pub planned: Option<PlannedPhase>,
}

impl AuditRun {
    pub fn phase(&self) -> Phase {
        self.manifest.phase
    }

    /// Terms as of the latest completed phase, in document order.
    pub fn current_terms(&self) -> Vec<Term> {
        let records = if let Some(r) = &self.remediated {
            &r.terms
        } else if let Some(v) = &self.verified {
            &v.terms
        } else if let Some(e) = &self.extracted {
            &e.terms
        } else {
            return Vec::new();
        };
        records.iter().cloned().map(TermRecord::into_term).collect()
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot ingest {path}: {source}")]
    Ingest { path: PathBuf, source: IngestError },
    #[error("document_changed: {path} no longer matches the run (fingerprint {stored} != {current})")]
    DocumentChanged { path: PathBuf, stored: String, current: String },
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Remediate(#[from] RemediationError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
}

impl PipelineError {
    /// The backend failure underneath, if that is what stopped the run.
    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            PipelineError::Extract(e) => Some(&e.error),
            PipelineError::Verify(e) => Some(&e.error),
            PipelineError::Remediate(RemediationError::Backend { error, .. }) => Some(error),
            PipelineError::Plan(PlanError::Backend { error, .. }) => Some(error),
            _ => None,
        }
    }
}

/// Stable id from the document content and the run configuration.
pub fn run_id(doc: &SourceDocument, config: &RunConfig) -> String {
    let cfg = serde_json::to_string(config).unwrap_or_default();
    let digest = sha256_hex(format!("{}\n{}\n{}", doc.fingerprint(), doc.source_name(), cfg).as_bytes());
    format!("run-{}", &digest[..16])
}

fn records(terms: &[Term]) -> Vec<TermRecord> {
    terms.iter().map(Term::to_record).collect()
}

/// Starts a fresh run under `root`, replacing any earlier run with the same
/// id. The run is left at phase `ingested`.
pub fn start(
    root: &Path,
    input: &DocumentInput,
    config: RunConfig,
    backend_id: &str,
) -> Result<(AuditRun, RunStore), PipelineError> {
    let document = input.load()?;
    let id = run_id(&document, &config);
    let mut store = RunStore::create(root.join(&id))?;
    let source_path = std::path::absolute(&input.path).unwrap_or_else(|_| input.path.clone());
    let manifest = Manifest {
        run_id: id,
        document: DocumentInfo {
            source_name: document.source_name().to_owned(),
            doc_id: document.doc_id().to_owned(),
            fingerprint: document.fingerprint().to_owned(),
            first_line: document.first_line(),
            line_count: document.line_count(),
            format: input.format,
        },
        source_path,
        backend_id: backend_id.to_owned(),
        config,
        phase: Phase::Ingested,
    };
    store.write_text(DOCUMENT, &document.text())?;
    store.write_json(MANIFEST, &manifest)?;
    store.append_event(
        Phase::Ingested,
        "ingested",
        json!({"lines": document.line_count(), "fingerprint": document.fingerprint(), "backend": backend_id}),
    )?;
    let run = AuditRun { manifest, document, extracted: None, verified: None, remediated: None, planned: None };
    Ok((run, store))
}

/// Loads a persisted run, checking the stored document copy against the
/// manifest.
pub fn load(dir: &Path) -> Result<(AuditRun, RunStore), PipelineError> {
    let store = RunStore::open(dir)?;
    let manifest: Manifest = store.read_json(MANIFEST)?.ok_or_else(|| StoreError::NotARun(dir.to_owned()))?;
    let text = store.read_text(DOCUMENT)?;
    let info = &manifest.document;
    let document = SourceDocument::from_lines(&info.source_name, info.first_line, text.split('\n'))
        .map_err(|source| PipelineError::Ingest { path: dir.join(DOCUMENT), source })?;
    if document.fingerprint() != info.fingerprint {
        return Err(StoreError::Corrupt {
            path: dir.join(DOCUMENT),
            detail: "document copy does not match the manifest fingerprint".into(),
        }
        .into());
    }
    let need = |phase: Phase, name: &str| -> Result<bool, PipelineError> {
        let present = dir.join(name).is_file();
        if manifest.phase >= phase && !present {
            return Err(StoreError::Corrupt {
                path: dir.join(name),
                detail: format!("missing for phase {}", manifest.phase),
            }
            .into());
        }
        Ok(manifest.phase >= phase)
    };
    let extracted = if need(Phase::Extracted, EXTRACTED)? { store.read_json(EXTRACTED)? } else { None };
    let verified = if need(Phase::Verified, VERIFIED)? { store.read_json(VERIFIED)? } else { None };
    let remediated = if need(Phase::Remediated, REMEDIATED)? { store.read_json(REMEDIATED)? } else { None };
    let planned = if need(Phase::Planned, PLANS)? { store.read_json(PLANS)? } else { None };
    Ok((AuditRun { manifest, document, extracted, verified, remediated, planned }, store))
}

/// Re-reads the original input and fails if its content changed. A missing
/// input falls back to the stored copy.
pub fn check_document(run: &AuditRun, store: &mut RunStore) -> Result<(), PipelineError> {
    let m = &run.manifest;
    let input = DocumentInput {
        path: m.source_path.clone(),
        source_name: m.document.source_name.clone(),
        format: m.document.format,
        first_line: m.document.first_line,
    };
    match input.load() {
        Ok(doc) if doc.fingerprint() == m.document.fingerprint => Ok(()),
        Ok(doc) => Err(PipelineError::DocumentChanged {
            path: input.path,
            stored: m.document.fingerprint.clone(),
            current: doc.fingerprint().to_owned(),
        }),
        Err(PipelineError::Read { path, source }) => {
            tracing::warn!(path = %path.display(), error = %source, "original document unavailable; using stored copy");
            store.append_event(m.phase, "source_unavailable", json!({"path": path, "error": source.to_string()}))?;
            Ok(())
        }
        Err(e) => Err(e),
    }
}

/// Runs phases until the run is complete or `stop_after` has been reached.
pub fn advance<B, E>(
    run: &mut AuditRun,
    store: &mut RunStore,
    backend: &B,
    exec: &E,
    stop_after: Option<Phase>,
) -> Result<(), PipelineError>
where
    B: Backend + ?Sized,
    E: Executor,
{
    while let Some(next) = run.phase().next() {
        if stop_after.is_some_and(|s| run.phase() >= s) {
            break;
        }
        match next {
            Phase::Extracted => extract_phase(run, store, backend, exec)?,
            Phase::Verified => verify_phase(run, store, backend, exec)?,
            Phase::Remediated => remediate_phase(run, store, backend, exec)?,
            Phase::Planned => plan_phase(run, store, backend, exec)?,
            Phase::Complete => complete_phase(run, store)?,
            Phase::Ingested => unreachable!("ingested is never a next phase"),
        }
    }
    Ok(())
}

fn set_phase(
    run: &mut AuditRun,
    store: &mut RunStore,
    phase: Phase,
    detail: serde_json::Value,
) -> Result<(), PipelineError> {
    run.manifest.phase = phase;
    store.write_json(MANIFEST, &run.manifest)?;
    store.append_event(phase, phase.as_str(), detail)?;
    Ok(())
}

fn fail_event(store: &mut RunStore, phase: Phase, e: &PipelineError) {
    let _ = store.append_event(phase, "phase_failed", json!({"error": e.to_string()}));
}

fn extract_phase<B, E>(run: &mut AuditRun, store: &mut RunStore, backend: &B, exec: &E) -> Result<(), PipelineError>
where
    B: Backend + ?Sized,
    E: Executor,
{
    let cfg = &run.manifest.config;
    let out = match extract_document(&run.document, &cfg.extraction, backend, exec, cfg.policy) {
        Ok(out) => out,
        Err(e) => {
            let e = PipelineError::from(e);
            fail_event(store, Phase::Extracted, &e);
            return Err(e);
        }
    };
    let phase = ExtractedPhase {
        terms: records(&out.terms),
        coverage: out.coverage,
        rejected: out.rejected,
        warnings: out.warnings,
        failures: out
            .failures
            .iter()
            .map(|f| FailureNote { item: f.chunk_id.clone(), error: f.error.to_string() })
            .collect(),
    };
    store.write_json(EXTRACTED, &phase)?;
    let detail = json!({
        "terms": phase.terms.len(),
        "chunks": phase.coverage.len(),
        "rejected": phase.rejected.len(),
        "failures": phase.failures.len(),
    });
    run.extracted = Some(phase);
    set_phase(run, store, Phase::Extracted, detail)
}

fn verify_phase<B, E>(run: &mut AuditRun, store: &mut RunStore, backend: &B, exec: &E) -> Result<(), PipelineError>
where
    B: Backend + ?Sized,
    E: Executor,
{
    let terms = run.current_terms();
    let cfg = &run.manifest.config;
    let results = verify_all(&terms, &run.document, backend, &cfg.verify, exec);
    let mut items = Vec::with_capacity(terms.len());
    let mut updated = Vec::with_capacity(terms.len());
    for (term, result) in terms.iter().zip(results) {
        match result {
            Ok(v) => {
                updated.push(apply_verification(term, &v)?);
                items.push(VerifiedItem { term_id: term.term_id.clone(), result: Some(v), error: None });
            }
            Err(e) if cfg.policy == FailurePolicy::FailFast => {
                let e = PipelineError::from(e);
                fail_event(store, Phase::Verified, &e);
                return Err(e);
            }
            Err(e) => {
                updated.push(discard_unverified(term)?);
                items.push(VerifiedItem {
                    term_id: term.term_id.clone(),
                    result: None,
                    error: Some(e.error.to_string()),
                });
            }
        }
    }
    let count = |s: TermStatus| updated.iter().filter(|t| t.status == s).count();
    let detail = json!({
        "supported": count(TermStatus::VerifiedSupported),
        "contradicted": count(TermStatus::Contradicted),
        "unverifiable": count(TermStatus::Unverifiable),
        "failed": count(TermStatus::Discarded),
    });
    let phase = VerifiedPhase { results: items, terms: records(&updated) };
    store.write_json(VERIFIED, &phase)?;
    run.verified = Some(phase);
    set_phase(run, store, Phase::Verified, detail)
}

fn remediate_phase<B, E>(run: &mut AuditRun, store: &mut RunStore, backend: &B, exec: &E) -> Result<(), PipelineError>
where
    B: Backend + ?Sized,
    E: Executor,
{
    let terms = run.current_terms();
    let verified = run.verified.as_ref().expect("verify phase precedes remediation");
    let opts = run.manifest.config.remediation();
    // terms whose verification failed are already discarded
    let work: Vec<(usize, Term, VerificationResult)> = terms
        .iter()
        .zip(&verified.results)
        .enumerate()
        .filter_map(|(i, (t, item))| item.result.clone().map(|v| (i, t.clone(), v)))
        .collect();
    let pairs: Vec<(Term, VerificationResult)> = work.iter().map(|(_, t, v)| (t.clone(), v.clone())).collect();
    let results = remediate_all(&pairs, &run.document, backend, &opts, exec);

    let mut final_terms = terms.clone();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for ((i, term, _), result) in work.iter().zip(results) {
        match result {
            Ok((outcome, t)) => {
                final_terms[*i] = t;
                outcomes.push(outcome);
            }
            Err(e) if opts.policy == FailurePolicy::FailFast => {
                let e = PipelineError::from(e);
                fail_event(store, Phase::Remediated, &e);
                return Err(e);
            }
            Err(e) => {
                let mut t = term.clone();
                t.status = TermStatus::Discarded;
                final_terms[*i] = t;
                failures.push(FailureNote { item: term.term_id.clone(), error: e.to_string() });
            }
        }
    }
    let count = |s: TermStatus| final_terms.iter().filter(|t| t.status == s).count();
    let detail = json!({
        "supported": count(TermStatus::VerifiedSupported),
        "resourced": count(TermStatus::Resourced),
        "discarded": count(TermStatus::Discarded),
    });
    let phase = RemediatedPhase { outcomes, terms: records(&final_terms), failures };
    store.write_json(REMEDIATED, &phase)?;
    run.remediated = Some(phase);
    set_phase(run, store, Phase::Remediated, detail)
}

fn plan_phase<B, E>(run: &mut AuditRun, store: &mut RunStore, backend: &B, exec: &E) -> Result<(), PipelineError>
where
    B: Backend + ?Sized,
    E: Executor,
{
    let terms = run.current_terms();
    let cfg = &run.manifest.config;
    let phase = match &cfg.scenario {
        None => {
            store.append_event(Phase::Planned, "planning_skipped", json!({"reason": "no scenario"}))?;
            PlannedPhase { scenario_fingerprint: None, plans: Vec::new(), skipped: Vec::new(), failures: Vec::new() }
        }
        Some(scenario) => match plan_all(&terms, &run.document, scenario, backend, &cfg.plan, exec, cfg.policy) {
            Ok(batch) => PlannedPhase {
                scenario_fingerprint: Some(scenario.fingerprint()),
                plans: batch.plans,
                skipped: batch.skipped,
                failures: batch
                    .failures
                    .iter()
                    .map(|f| FailureNote { item: f.term_id().to_owned(), error: f.to_string() })
                    .collect(),
            },
            Err(e) => {
                let e = PipelineError::from(e);
                fail_event(store, Phase::Planned, &e);
                return Err(e);
            }
        },
    };
    store.write_json(PLANS, &phase)?;
    let detail = json!({"plans": phase.plans.len(), "skipped": phase.skipped.len(), "failures": phase.failures.len()});
    run.planned = Some(phase);
    set_phase(run, store, Phase::Planned, detail)
}

/// Names of the report files written when a run completes.
pub const REPORT_FILES: [(&str, report::Format); 3] = [
    ("report.audit.json", report::Format::AuditJson),
    ("report.paper.json", report::Format::PaperJson),
    ("report.md", report::Format::Markdown),
];

fn complete_phase(run: &mut AuditRun, store: &mut RunStore) -> Result<(), PipelineError> {
    run.manifest.phase = Phase::Complete;
    for (name, format) in REPORT_FILES {
        let text = report::render(run, format).expect("complete runs are reportable");
        store.write_text(name, &text)?;
    }
    let terms = run.current_terms();
    let surviving = terms.iter().filter(|t| t.status.is_surviving()).count();
    set_phase(
        run,
        store,
        Phase::Complete,
        json!({"extracted": terms.len(), "surviving": surviving, "discarded": terms.len() - surviving}),
    )
}
