//! The verification agent: a lexical pre-check followed by a semantic
//! judgment of whether a term is faithful to the passage it cites.
//!
//! The agent sees only the cited passage (optionally widened by a few
//! context lines), never the whole document. A citation that does not
//! resolve is labeled `Unverifiable` without calling the backend. The
//! lexical score never overrides the backend's label; it only flags.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{complete, Backend, BackendError, BackendRequest, ResponseSchema};
use crate::document::{resolve_span, SourceDocument, SourceRef};
use crate::exec::Executor;
use crate::lexical::{lexical_support_score, DEFAULT_LOW_OVERLAP_THRESHOLD};
use crate::parser::GenerationSettings;
use crate::prompts;
use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Supported,
    Contradicted,
    Unverifiable,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Supported => "Supported",
            Label::Contradicted => "Contradicted",
            Label::Unverifiable => "Unverifiable",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "supported" => Ok(Label::Supported),
            "contradicted" => Ok(Label::Contradicted),
            "unverifiable" => Ok(Label::Unverifiable),
            other => Err(alloc::format!("`{other}` is not one of Supported, Contradicted, Unverifiable")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreCheckFlag {
    Pass,
    LowOverlap,
    Unresolvable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub term_id: String,
    /// The citation that was judged.
    pub source: SourceRef,
    pub label: Label,
    pub justification: String,
    pub lexical_score: f64,
    pub pre_check_flag: PreCheckFlag,
    /// Absent when the backend was not consulted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier_prompt_fingerprint: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub threshold: f64,
    /// Extra lines shown on each side of the cited span.
    pub context_lines: u32,
    pub generation: GenerationSettings,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            threshold: DEFAULT_LOW_OVERLAP_THRESHOLD,
            context_lines: 0,
            generation: GenerationSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("verification failed for term {term_id}: {error}")]
pub struct VerifyError {
    pub term_id: String,
    pub error: BackendError,
}

/// The verifier prompt for `statement` against the text at `source`.
pub fn verification_request(
    statement: &str,
    source: &SourceRef,
    passage: &str,
    opts: &VerifyOptions,
) -> BackendRequest {
    let user = prompts::render(
        prompts::VERIFY_USER,
        &[("statement", statement), ("source", &source.to_string()), ("passage", passage)],
    );
    opts.generation.request(prompts::VERIFY_ROLE, user, ResponseSchema::Verification)
}

fn passage(doc: &SourceDocument, source: &SourceRef, context_lines: u32) -> Result<String, ()> {
    let cited = resolve_span(doc, source).map_err(|_| ())?;
    if context_lines == 0 {
        return Ok(cited);
    }
    let start = source.start_line.saturating_sub(context_lines).max(doc.first_line());
    let end = source.end_line.saturating_add(context_lines).min(doc.last_line());
    resolve_span(doc, &source.with_lines(start, end)).map_err(|_| ())
}

/// Verifies `term` against its current source.
pub fn verify_term<B: Backend + ?Sized>(
    term: &Term,
    doc: &SourceDocument,
    backend: &B,
    opts: &VerifyOptions,
) -> Result<VerificationResult, VerifyError> {
    verify_against(term, &term.source, doc, backend, opts)
}

/// Verifies `term`'s statement against `source`, which need not be the
/// term's current citation (used when trying a replacement span).
pub fn verify_against<B: Backend + ?Sized>(
    term: &Term,
    source: &SourceRef,
    doc: &SourceDocument,
    backend: &B,
    opts: &VerifyOptions,
) -> Result<VerificationResult, VerifyError> {
    let unresolvable = |reason: String| VerificationResult {
        term_id: term.term_id.clone(),
        source: source.clone(),
        label: Label::Unverifiable,
        justification: reason,
        lexical_score: 0.0,
        pre_check_flag: PreCheckFlag::Unresolvable,
        verifier_prompt_fingerprint: None,
    };
    let cited = match resolve_span(doc, source) {
        Ok(text) => text,
        Err(e) => return Ok(unresolvable(alloc::format!("cited source does not resolve: {e}"))),
    };
    let Ok(shown) = passage(doc, source, opts.context_lines) else {
        return Ok(unresolvable("cited source does not resolve".to_owned()));
    };
    let lexical_score = lexical_support_score(&term.statement, &cited);
    let pre_check_flag = if lexical_score < opts.threshold { PreCheckFlag::LowOverlap } else { PreCheckFlag::Pass };

    let req = verification_request(&term.statement, source, &shown, opts);
    let err = |error| VerifyError { term_id: term.term_id.clone(), error };
    let resp = complete(backend, &req).map_err(err)?;
    let parsed = resp.parsed.as_ref();
    let label = parsed
        .and_then(|v| v.get("verification"))
        .and_then(|v| v.as_str())
        .and_then(|s| s.parse::<Label>().ok())
        .ok_or_else(|| err(BackendError::MalformedOutput { schema: "verification", detail: "missing label".into() }))?;
    let justification =
        parsed.and_then(|v| v.get("justification")).and_then(|v| v.as_str()).unwrap_or_default().to_owned();
    Ok(VerificationResult {
        term_id: term.term_id.clone(),
        source: source.clone(),
        label,
        justification,
        lexical_score,
        pre_check_flag,
        verifier_prompt_fingerprint: Some(req.fingerprint().to_owned()),
    })
}

/// Verifies every term; results are aligned with `terms`.
pub fn verify_all<B, E>(
    terms: &[Term],
    doc: &SourceDocument,
    backend: &B,
    opts: &VerifyOptions,
    exec: &E,
) -> Vec<Result<VerificationResult, VerifyError>>
where
    B: Backend + ?Sized,
    E: Executor,
{
    exec.map(terms, |_, t| verify_term(t, doc, backend, opts))
}
