//! Scenario-aware accountability planning for verified terms.
//!
//! Jurisdiction profiles only add emphasis to the planner prompt. Nothing in
//! this module decides whether a service complies with any regulation.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{complete, Backend, BackendError, BackendRequest, ResponseSchema};
use crate::document::{resolve_span, SourceDocument};
use crate::exec::Executor;
use crate::hash::FieldHasher;
use crate::parser::GenerationSettings;
use crate::prompts;
use crate::term::{Term, TermStatus};
use crate::FailurePolicy;

/// Upper bound on the length of one check, in characters.
pub const MAX_CHECK_CHARS: usize = 500;
pub const DEFAULT_MIN_CHECKS: u32 = 3;

/// Printed at the top of every report that carries plans.
pub const DISCLAIMER: &str = "Accountability checks are planning aids for a human auditor. \
They are not a determination of legal compliance with any regulation.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Jurisdiction {
    #[default]
    None,
    Gdpr,
    Ccpa,
}

impl FromStr for Jurisdiction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Jurisdiction::None),
            "gdpr" => Ok(Jurisdiction::Gdpr),
            "ccpa" => Ok(Jurisdiction::Ccpa),
            other => Err(alloc::format!("unknown jurisdiction `{other}` (expected none, gdpr or ccpa)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JurisdictionProfile {
    pub id: Jurisdiction,
    pub prompt_addendum: &'static str,
    pub citation_note: &'static str,
}

const PROFILES: &[JurisdictionProfile] = &[
    JurisdictionProfile { id: Jurisdiction::None, prompt_addendum: "", citation_note: "" },
    JurisdictionProfile {
        id: Jurisdiction::Gdpr,
        prompt_addendum: "The user is located in the European Union. Where relevant, include checks a data \
subject can perform under EU data-protection rules: finding the stated legal basis for processing, \
requesting access to or a copy of their personal data, requesting erasure or correction, withdrawing \
consent, and locating the controller's or data protection officer's contact details.",
        citation_note: "General Data Protection Regulation (EU) 2016/679",
    },
    JurisdictionProfile {
        id: Jurisdiction::Ccpa,
        prompt_addendum: "The user is a California resident. Where relevant, include checks a consumer can \
perform under California privacy law: finding a \"Do Not Sell or Share My Personal Information\" link, \
submitting a request to know or delete personal information, and reviewing the disclosed categories of \
personal information collected and shared.",
        citation_note: "California Consumer Privacy Act, Cal. Civ. Code 1798.100 et seq.",
    },
];

impl Jurisdiction {
    pub fn profile(self) -> &'static JurisdictionProfile {
        PROFILES.iter().find(|p| p.id == self).unwrap_or(&PROFILES[0])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<String>,
    #[serde(default)]
    pub jurisdiction: Jurisdiction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("scenario description must not be empty")]
pub struct EmptyScenario;

impl Scenario {
    pub fn new(description: impl Into<String>) -> Result<Self, EmptyScenario> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(EmptyScenario);
        }
        Ok(Scenario { description, persona: None, jurisdiction: Jurisdiction::None })
    }

    pub fn with_persona(mut self, persona: impl Into<String>) -> Self {
        self.persona = Some(persona.into());
        self
    }

    pub fn with_jurisdiction(mut self, j: Jurisdiction) -> Self {
        self.jurisdiction = j;
        self
    }

    pub fn fingerprint(&self) -> String {
        let mut h = FieldHasher::new("scenario");
        h.field(self.description.as_bytes())
            .field(self.persona.as_deref().unwrap_or("").as_bytes())
            .field(alloc::format!("{:?}", self.jurisdiction).as_bytes());
        h.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountabilityPlan {
    pub term_id: String,
    pub possible_accountability_checks: Vec<String>,
    pub scenario_fingerprint: String,
    pub jurisdiction_used: Jurisdiction,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub min_checks: u32,
    pub generation: GenerationSettings,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions { min_checks: DEFAULT_MIN_CHECKS, generation: GenerationSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("term {term_id} is {status:?}; only supported terms are planned")]
    Ineligible { term_id: String, status: TermStatus },
    #[error("source of term {term_id} does not resolve: {reason}")]
    Unresolvable { term_id: String, reason: String },
    #[error("planning failed for term {term_id}: {error}")]
    Backend { term_id: String, error: BackendError },
}

impl PlanError {
    pub fn term_id(&self) -> &str {
        match self {
            PlanError::Ineligible { term_id, .. }
            | PlanError::Unresolvable { term_id, .. }
            | PlanError::Backend { term_id, .. } => term_id,
        }
    }
}

/// The planner prompt for `term` under `scenario`.
pub fn plan_request(
    term: &Term,
    source_text: &str,
    scenario: &Scenario,
    min_checks: u32,
    generation: &GenerationSettings,
) -> BackendRequest {
    let persona = scenario.persona.as_ref().map(|p| alloc::format!(" ({p})")).unwrap_or_default();
    let profile = scenario.jurisdiction.profile();
    let jurisdiction = if profile.prompt_addendum.is_empty() {
        String::new()
    } else {
        alloc::format!("\nJurisdiction ({}):\n{}\n", profile.citation_note, profile.prompt_addendum)
    };
    let user = prompts::render(
        prompts::PLAN_USER,
        &[
            ("statement", &term.statement),
            ("source", &term.source.to_string()),
            ("source_text", source_text),
            ("persona", &persona),
            ("scenario", &scenario.description),
            ("jurisdiction", &jurisdiction),
            ("min_checks", &min_checks.to_string()),
        ],
    );
    generation.request(prompts::PLAN_ROLE, user, ResponseSchema::Plan)
}

fn checks_of(parsed: Option<&Value>) -> Vec<String> {
    parsed
        .and_then(|v| v.get("possible_accountability_checks"))
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(|s| s.trim().to_owned()).collect())
        .unwrap_or_default()
}

/// Plans checks for one supported term. Fewer than `min_checks` checks
/// triggers one follow-up request; a remaining shortfall is a warning.
pub fn plan_term<B: Backend + ?Sized>(
    term: &Term,
    doc: &SourceDocument,
    scenario: &Scenario,
    backend: &B,
    opts: &PlanOptions,
) -> Result<AccountabilityPlan, PlanError> {
    if !term.status.is_plannable() {
        return Err(PlanError::Ineligible { term_id: term.term_id.clone(), status: term.status });
    }
    let source_text = resolve_span(doc, &term.source)
        .map_err(|e| PlanError::Unresolvable { term_id: term.term_id.clone(), reason: e.to_string() })?;
    let err = |error| PlanError::Backend { term_id: term.term_id.clone(), error };
    let req = plan_request(term, &source_text, scenario, opts.min_checks, &opts.generation);
    let mut checks = checks_of(complete(backend, &req).map_err(err)?.parsed.as_ref());
    let mut warnings = Vec::new();
    let min = opts.min_checks as usize;
    if checks.len() < min {
        let more = BackendRequest::new(
            req.role_prompt(),
            alloc::format!(
                "{}\n\nYour previous answer listed only {} check(s). List at least {} distinct checks.",
                req.user_prompt(),
                checks.len(),
                min
            ),
            ResponseSchema::Plan,
        )
        .with_temperature(req.temperature())
        .with_max_output_tokens(req.max_output_tokens());
        match complete(backend, &more) {
            Ok(resp) => {
                let retry = checks_of(resp.parsed.as_ref());
                if retry.len() > checks.len() {
                    checks = retry;
                }
            }
            Err(BackendError::MalformedOutput { .. }) => {}
            Err(e) => return Err(err(e)),
        }
        if checks.len() < min {
            warnings.push(alloc::format!("only {} of {} requested checks", checks.len(), min));
        }
    }
    Ok(AccountabilityPlan {
        term_id: term.term_id.clone(),
        possible_accountability_checks: checks,
        scenario_fingerprint: scenario.fingerprint(),
        jurisdiction_used: scenario.jurisdiction,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipNotice {
    pub term_id: String,
    pub status: TermStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanBatch {
    pub plans: Vec<AccountabilityPlan>,
    pub skipped: Vec<SkipNotice>,
    pub failures: Vec<PlanError>,
}

/// Plans every eligible term in input order; ineligible terms are skipped
/// with a notice.
pub fn plan_all<B, E>(
    terms: &[Term],
    doc: &SourceDocument,
    scenario: &Scenario,
    backend: &B,
    opts: &PlanOptions,
    exec: &E,
    policy: FailurePolicy,
) -> Result<PlanBatch, PlanError>
where
    B: Backend + ?Sized,
    E: Executor,
{
    let mut batch = PlanBatch { plans: Vec::new(), skipped: Vec::new(), failures: Vec::new() };
    let eligible: Vec<&Term> = terms
        .iter()
        .filter(|t| {
            let ok = t.status.is_plannable();
            if !ok {
                batch.skipped.push(SkipNotice { term_id: t.term_id.clone(), status: t.status });
            }
            ok
        })
        .collect();
    for result in exec.map(&eligible, |_, t| plan_term(t, doc, scenario, backend, opts)) {
        match result {
            Ok(plan) => batch.plans.push(plan),
            Err(e) if policy == FailurePolicy::FailFast => return Err(e),
            Err(e) => batch.failures.push(e),
        }
    }
    Ok(batch)
}
