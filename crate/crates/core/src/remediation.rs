//! Re-sourcing of terms that failed verification, and the term lifecycle.
//!
//! A term that is not `Supported` gets up to `max_attempts` proposals for a
//! better citation. The first proposal that verifies `Supported` replaces the
//! term's source; otherwise the term is discarded. A proposal that repeats an
//! already-tried span ends the loop, so the loop always terminates.
//!
//! Lifecycle:
//!
//! ```text
//! extracted ──► verified_supported
//!     │  ├────► contradicted ──┬──► resourced
//!     │  └────► unverifiable ──┴──► discarded
//!     └─────────────────────────────► discarded   (verification failed)
//! ```

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{complete, Backend, BackendError, BackendRequest, ResponseSchema};
use crate::document::{render_numbered, SourceDocument, SourceRef};
use crate::exec::Executor;
use crate::prompts;
use crate::span_search::{best_window, DEFAULT_MAX_SPAN_LINES};
use crate::term::{Term, TermStatus};
use crate::verifier::{verify_against, Label, VerificationResult, VerifyOptions};
use crate::FailurePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("illegal lifecycle transition {from:?} -> {to:?}")]
pub struct LifecycleError {
    pub from: TermStatus,
    pub to: TermStatus,
}

/// Checks a status change against the lifecycle.
pub fn transition(from: TermStatus, to: TermStatus) -> Result<TermStatus, LifecycleError> {
    use TermStatus::*;
    let ok = matches!(
        (from, to),
        (Extracted, VerifiedSupported | Contradicted | Unverifiable | Discarded)
            | (Contradicted | Unverifiable, Resourced | Discarded)
    );
    if ok {
        Ok(to)
    } else {
        Err(LifecycleError { from, to })
    }
}

pub fn status_for_label(label: Label) -> TermStatus {
    match label {
        Label::Supported => TermStatus::VerifiedSupported,
        Label::Contradicted => TermStatus::Contradicted,
        Label::Unverifiable => TermStatus::Unverifiable,
    }
}

/// Moves an `extracted` term to the status its verification implies.
pub fn apply_verification(term: &Term, result: &VerificationResult) -> Result<Term, LifecycleError> {
    let mut t = term.clone();
    t.status = transition(term.status, status_for_label(result.label))?;
    Ok(t)
}

/// Discards an `extracted` term whose verification could not be obtained.
pub fn discard_unverified(term: &Term) -> Result<Term, LifecycleError> {
    let mut t = term.clone();
    t.status = transition(term.status, TermStatus::Discarded)?;
    Ok(t)
}

/// How replacement citations are proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Resourcer {
    /// Ask a parser-role backend call with the full numbered document.
    #[default]
    Llm,
    /// Best lexical window, no backend call.
    Lexical { max_span_lines: u32 },
}

impl Resourcer {
    pub fn lexical() -> Self {
        Resourcer::Lexical { max_span_lines: DEFAULT_MAX_SPAN_LINES }
    }
}

pub const DEFAULT_MAX_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemediationOptions {
    pub max_attempts: u32,
    pub resourcer: Resourcer,
    pub verify: VerifyOptions,
    pub policy: FailurePolicy,
}

impl Default for RemediationOptions {
    fn default() -> Self {
        RemediationOptions {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            resourcer: Resourcer::Llm,
            verify: VerifyOptions::default(),
            policy: FailurePolicy::FailFast,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RemediationError {
    #[error("remediation failed for term {term_id}: {error}")]
    Backend { term_id: String, error: BackendError },
    #[error("verification result is for term {result_term_id}, not {term_id}")]
    Mismatch { term_id: String, result_term_id: String },
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
}

/// The re-sourcing prompt for `term`.
pub fn resource_request(term: &Term, doc: &SourceDocument, verify: &VerifyOptions) -> BackendRequest {
    let role = prompts::render(prompts::RESOURCE_ROLE, &[("source_name", doc.source_name())]);
    let user = prompts::render(
        prompts::RESOURCE_USER,
        &[
            ("statement", &term.statement),
            ("previous_source", &term.source.to_string()),
            ("numbered_text", &render_numbered(doc)),
        ],
    );
    verify.generation.request(&role, user, ResponseSchema::SourceSpan)
}

/// Proposes a better citation for `term`, or `None` when nothing usable is
/// found. Proposals that do not resolve in `doc` count as `None`.
pub fn resource_term<B: Backend + ?Sized>(
    term: &Term,
    doc: &SourceDocument,
    backend: &B,
    resourcer: Resourcer,
    verify: &VerifyOptions,
) -> Result<Option<SourceRef>, BackendError> {
    match resourcer {
        Resourcer::Lexical { max_span_lines } => {
            Ok(best_window(doc, &term.statement, max_span_lines).map(|m| m.source))
        }
        Resourcer::Llm => {
            let resp = complete(backend, &resource_request(term, doc, verify))?;
            let proposal = resp
                .parsed
                .as_ref()
                .and_then(|v| v.get("source"))
                .and_then(Value::as_str)
                .and_then(|s| s.parse::<SourceRef>().ok())
                .filter(|r| doc.resolves(r));
            Ok(proposal)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemediationAction {
    KeptSupported,
    Resourced,
    Discarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepNote {
    /// The proposal was verified; see the step's verification.
    Verified,
    /// No usable proposal came back.
    NoProposal,
    /// The proposal had already been tried.
    Repeated,
    /// The backend failed during this step.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemediationStep {
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed: Option<SourceRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationResult>,
    pub note: StepNote,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemediationOutcome {
    pub term_id: String,
    pub action: RemediationAction,
    pub old_source: SourceRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_source: Option<SourceRef>,
    pub attempts: u32,
    pub trail: Vec<RemediationStep>,
}

impl RemediationOutcome {
    /// The verification that supports the term's final source, if any.
    pub fn final_verification(&self) -> Option<&VerificationResult> {
        self.trail.iter().rev().find_map(|s| s.verification.as_ref()).filter(|v| v.label == Label::Supported)
    }
}

/// Runs the re-sourcing loop for one term. Returns the outcome and the term
/// in its final status (`verified_supported`, `resourced` or `discarded`).
pub fn remediate<B: Backend + ?Sized>(
    term: &Term,
    result: &VerificationResult,
    doc: &SourceDocument,
    backend: &B,
    opts: &RemediationOptions,
) -> Result<(RemediationOutcome, Term), RemediationError> {
    if result.term_id != term.term_id {
        return Err(RemediationError::Mismatch {
            term_id: term.term_id.clone(),
            result_term_id: result.term_id.clone(),
        });
    }
    let mut current =
        if term.status == TermStatus::Extracted { apply_verification(term, result)? } else { term.clone() };
    let mut outcome = RemediationOutcome {
        term_id: term.term_id.clone(),
        action: RemediationAction::KeptSupported,
        old_source: term.source.clone(),
        new_source: None,
        attempts: 0,
        trail: Vec::new(),
    };
    if result.label == Label::Supported {
        return Ok((outcome, current));
    }

    let mut tried: BTreeSet<SourceRef> = BTreeSet::new();
    tried.insert(term.source.clone());
    tried.insert(result.source.clone());
    let fail = |attempt: u32, error: BackendError, outcome: &mut RemediationOutcome| {
        if opts.policy == FailurePolicy::FailFast {
            return Err(RemediationError::Backend { term_id: term.term_id.clone(), error });
        }
        outcome.trail.push(RemediationStep {
            attempt,
            proposed: None,
            verification: None,
            note: StepNote::Failed,
            detail: Some(error.to_string()),
        });
        Ok(())
    };

    for attempt in 1..=opts.max_attempts {
        outcome.attempts = attempt;
        let proposal = match resource_term(&current, doc, backend, opts.resourcer, &opts.verify) {
            Ok(p) => p,
            Err(e) => {
                fail(attempt, e, &mut outcome)?;
                break;
            }
        };
        let Some(proposed) = proposal else {
            outcome.trail.push(RemediationStep {
                attempt,
                proposed: None,
                verification: None,
                note: StepNote::NoProposal,
                detail: None,
            });
            break;
        };
        if !tried.insert(proposed.clone()) {
            outcome.trail.push(RemediationStep {
                attempt,
                proposed: Some(proposed),
                verification: None,
                note: StepNote::Repeated,
                detail: None,
            });
            break;
        }
        let verification = match verify_against(&current, &proposed, doc, backend, &opts.verify) {
            Ok(v) => v,
            Err(e) => {
                fail(attempt, e.error, &mut outcome)?;
                break;
            }
        };
        let supported = verification.label == Label::Supported;
        outcome.trail.push(RemediationStep {
            attempt,
            proposed: Some(proposed.clone()),
            verification: Some(verification),
            note: StepNote::Verified,
            detail: None,
        });
        if supported {
            current.status = transition(current.status, TermStatus::Resourced)?;
            current.source = proposed.clone();
            outcome.action = RemediationAction::Resourced;
            outcome.new_source = Some(proposed);
            return Ok((outcome, current));
        }
    }
    current.status = transition(current.status, TermStatus::Discarded)?;
    outcome.action = RemediationAction::Discarded;
    Ok((outcome, current))
}

/// Remediates every term against its aligned verification result.
pub fn remediate_all<B, E>(
    items: &[(Term, VerificationResult)],
    doc: &SourceDocument,
    backend: &B,
    opts: &RemediationOptions,
    exec: &E,
) -> Vec<Result<(RemediationOutcome, Term), RemediationError>>
where
    B: Backend + ?Sized,
    E: Executor,
{
    exec.map(items, |_, (t, v)| remediate(t, v, doc, backend, opts))
}
