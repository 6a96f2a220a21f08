//! The term-parsing agent: prompts the backend with a numbered chunk,
//! validates every candidate it returns, and merges results across chunks.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{complete, Backend, BackendError, BackendRequest, ResponseSchema};
use crate::chunker::{chunk, Chunk, ChunkStrategy};
use crate::document::{render_lines, SourceDocument};
use crate::exec::Executor;
use crate::prompts::{self, PROMPT_VERSION};
use crate::term::{dedupe_terms, validate_term, Term, ValidateOptions};
use crate::FailurePolicy;

/// Sampling settings shared by every agent call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationSettings {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            temperature: crate::backend::DEFAULT_TEMPERATURE,
            max_output_tokens: crate::backend::DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

impl GenerationSettings {
    pub(crate) fn request(&self, role: &str, user: String, schema: ResponseSchema) -> BackendRequest {
        BackendRequest::new(role, user, schema)
            .with_temperature(self.temperature)
            .with_max_output_tokens(self.max_output_tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Topics to restrict extraction to. Broad or vague aspects tend to pull
    /// in disclaimers that are not user-facing terms; keep them specific.
    pub aspects: Vec<String>,
    pub strategy: ChunkStrategy,
    /// Provider's proper name, treated as a provider alias for party labels.
    pub provider_name: Option<String>,
    pub prompt_version: String,
    pub generation: GenerationSettings,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            aspects: Vec::new(),
            strategy: ChunkStrategy::default(),
            provider_name: None,
            prompt_version: String::from(PROMPT_VERSION),
            generation: GenerationSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("aspects must be non-empty strings")]
    EmptyAspect,
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.aspects.iter().any(|a| a.trim().is_empty()) {
            return Err(ConfigError::EmptyAspect);
        }
        Ok(())
    }

    /// The aspect label stored on each extracted term.
    pub fn aspect_label(&self) -> Option<String> {
        (!self.aspects.is_empty()).then(|| self.aspects.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("extraction failed for chunk {chunk_id}: {error}")]
pub struct ExtractError {
    pub chunk_id: String,
    pub error: BackendError,
}

/// A candidate the backend returned that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub chunk_id: String,
    pub index: usize,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkExtraction {
    pub chunk_id: String,
    pub terms: Vec<Term>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
}

/// The extraction prompt for `chunk`. `replica` is `(index, fanout)` for
/// parallel-merge runs.
pub fn extraction_request(
    chunk: &Chunk,
    doc: &SourceDocument,
    cfg: &ExtractionConfig,
    replica: Option<(u32, u32)>,
) -> BackendRequest {
    let lines = doc.range(chunk.start_line, chunk.end_line).unwrap_or(&[]);
    let mut scope = match cfg.aspect_label() {
        Some(_) => {
            alloc::format!("Only extract terms that concern the following aspect(s): {}.", cfg.aspects.join("; "))
        }
        None => String::from("Extract every term in the excerpt."),
    };
    if let Some((i, n)) = replica {
        scope.push_str(&alloc::format!("\nParser replica {} of {}.", i + 1, n));
    }
    let start = chunk.start_line.to_string();
    let end = chunk.end_line.to_string();
    let user = prompts::render(
        prompts::EXTRACT_USER,
        &[
            ("source_name", doc.source_name()),
            ("heading", chunk.heading.as_deref().unwrap_or("(none)")),
            ("scope", &scope),
            ("start_line", &start),
            ("end_line", &end),
            ("numbered_text", &render_lines(lines)),
        ],
    );
    let role = prompts::render(prompts::EXTRACT_ROLE, &[("source_name", doc.source_name())]);
    cfg.generation.request(&role, user, ResponseSchema::TermList)
}

/// Extracts and validates the terms of one chunk.
pub fn extract_chunk<B: Backend + ?Sized>(
    chunk: &Chunk,
    doc: &SourceDocument,
    cfg: &ExtractionConfig,
    backend: &B,
) -> Result<ChunkExtraction, ExtractError> {
    extract_chunk_replica(chunk, doc, cfg, backend, None)
}

fn extract_chunk_replica<B: Backend + ?Sized>(
    chunk: &Chunk,
    doc: &SourceDocument,
    cfg: &ExtractionConfig,
    backend: &B,
    replica: Option<(u32, u32)>,
) -> Result<ChunkExtraction, ExtractError> {
    let req = extraction_request(chunk, doc, cfg, replica);
    let resp = complete(backend, &req).map_err(|error| ExtractError { chunk_id: chunk.chunk_id.clone(), error })?;
    let candidates = match resp.parsed {
        Some(Value::Array(items)) => items,
        _ => Vec::new(),
    };
    let aspect = cfg.aspect_label();
    let opts = ValidateOptions { provider_name: cfg.provider_name.as_deref(), aspect: aspect.as_deref() };
    let mut out = ChunkExtraction {
        chunk_id: chunk.chunk_id.clone(),
        terms: Vec::new(),
        rejected: Vec::new(),
        warnings: Vec::new(),
    };
    for (index, cand) in candidates.iter().enumerate() {
        match validate_term(cand, doc, &opts) {
            Ok(v) => {
                let mut term = v.term;
                term.span_outside_chunk = !chunk.contains(term.source.start_line, term.source.end_line);
                out.warnings.extend(v.warnings);
                out.terms.push(term);
            }
            Err(e) => out.rejected.push(Rejection {
                chunk_id: chunk.chunk_id.clone(),
                index,
                kind: String::from(e.kind()),
                detail: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Per-chunk extraction counts; chunks with zero terms deserve a human look.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkCoverage {
    pub chunk_id: String,
    pub start_line: u32,
    pub end_line: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<String>,
    pub terms_extracted: usize,
    pub candidates_rejected: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentExtraction {
    /// Deduplicated terms ordered by start line.
    pub terms: Vec<Term>,
    pub coverage: Vec<ChunkCoverage>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
    pub failures: Vec<ExtractError>,
}

impl DocumentExtraction {
    pub fn zero_term_chunks(&self) -> impl Iterator<Item = &ChunkCoverage> {
        self.coverage.iter().filter(|c| c.terms_extracted == 0)
    }
}

/// Chunks `doc`, extracts every chunk (each `parallel_fanout` times), and
/// merges. Output order depends only on chunk order, never on completion
/// order.
pub fn extract_document<B, E>(
    doc: &SourceDocument,
    cfg: &ExtractionConfig,
    backend: &B,
    exec: &E,
    policy: FailurePolicy,
) -> Result<DocumentExtraction, ExtractError>
where
    B: Backend + ?Sized,
    E: Executor,
{
    let chunks = chunk(doc, &cfg.strategy);
    let fanout = cfg.strategy.parallel_fanout();
    let work: Vec<(usize, u32)> = (0..chunks.len()).flat_map(|c| (0..fanout).map(move |r| (c, r))).collect();
    let results = exec.map(&work, |_, &(c, r)| {
        let replica = (fanout > 1).then_some((r, fanout));
        extract_chunk_replica(&chunks[c], doc, cfg, backend, replica)
    });

    let mut coverage: Vec<ChunkCoverage> = chunks
        .iter()
        .map(|c| ChunkCoverage {
            chunk_id: c.chunk_id.clone(),
            start_line: c.start_line,
            end_line: c.end_line,
            heading: c.heading.clone(),
            terms_extracted: 0,
            candidates_rejected: 0,
            error: None,
        })
        .collect();
    let mut all = Vec::new();
    let mut rejected = Vec::new();
    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    for (&(c, _), result) in work.iter().zip(results) {
        match result {
            Ok(ex) => {
                coverage[c].terms_extracted += ex.terms.len();
                coverage[c].candidates_rejected += ex.rejected.len();
                all.extend(ex.terms);
                rejected.extend(ex.rejected);
                warnings.extend(ex.warnings);
            }
            Err(e) if policy == FailurePolicy::FailFast => return Err(e),
            Err(e) => {
                coverage[c].error = Some(e.error.to_string());
                failures.push(e);
            }
        }
    }
    Ok(DocumentExtraction { terms: dedupe_terms(all), coverage, rejected, warnings, failures })
}
