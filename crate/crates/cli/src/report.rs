//! Report rendering for persisted runs.
//!
//! Reports contain no timestamps and no backend identity, so a replayed run
//! renders byte-identical output.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use terminators_core::planner::{AccountabilityPlan, DISCLAIMER};
use terminators_core::remediation::RemediationOutcome;
use terminators_core::term::{CompactRecord, TermRecord};
use terminators_core::{Label, Term, TermStatus, VerificationResult};

use crate::pipeline::{AuditRun, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// Full lifecycle record.
    AuditJson,
    /// `{term, source, applicable_to}` for surviving terms.
    PaperJson,
    Markdown,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::AuditJson => "audit_json",
            Format::PaperJson => "paper_json",
            Format::Markdown => "markdown",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "audit_json" | "audit" => Ok(Format::AuditJson),
            "paper_json" | "paper" => Ok(Format::PaperJson),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(format!("unknown report format `{s}` (audit_json, paper_json, markdown)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("run is at phase {0}; reports need at least `extracted`")]
pub struct NotReportable(pub Phase);

/// Everything known about one term at the end of the run.
#[derive(Debug, Clone, Serialize)]
pub struct TermReport<'a> {
    #[serde(flatten)]
    pub record: &'a TermRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<&'a VerificationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification_error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remediation: Option<&'a RemediationOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<&'a AccountabilityPlan>,
}

impl TermReport<'_> {
    /// The label for the term's current source.
    pub fn label(&self) -> Option<Label> {
        match (self.record.status, self.remediation) {
            (TermStatus::Resourced, Some(r)) => r.final_verification().map(|v| v.label),
            _ => self.verification.map(|v| v.label),
        }
    }

    pub fn check_count(&self) -> usize {
        self.plan.map_or(0, |p| p.possible_accountability_checks.len())
    }
}

fn latest_records(run: &AuditRun) -> &[TermRecord] {
    if let Some(r) = &run.remediated {
        &r.terms
    } else if let Some(v) = &run.verified {
        &v.terms
    } else if let Some(e) = &run.extracted {
        &e.terms
    } else {
        &[]
    }
}

/// One entry per extracted term, in document order.
pub fn term_reports(run: &AuditRun) -> Vec<TermReport<'_>> {
    latest_records(run)
        .iter()
        .map(|record| {
            let id = record.term_id.as_str();
            let item = run.verified.as_ref().and_then(|v| v.results.iter().find(|i| i.term_id == id));
            TermReport {
                record,
                verification: item.and_then(|i| i.result.as_ref()),
                verification_error: item.and_then(|i| i.error.as_deref()),
                remediation: run.remediated.as_ref().and_then(|r| r.outcomes.iter().find(|o| o.term_id == id)),
                plan: run.planned.as_ref().and_then(|p| p.plans.iter().find(|p| p.term_id == id)),
            }
        })
        .collect()
}

pub fn render(run: &AuditRun, format: Format) -> Result<String, NotReportable> {
    if run.phase() < Phase::Extracted {
        return Err(NotReportable(run.phase()));
    }
    Ok(match format {
        Format::AuditJson => pretty(&audit_json(run)),
        Format::PaperJson => pretty(&paper_json(run)),
        Format::Markdown => markdown(run),
    })
}

fn pretty<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

pub fn paper_json(run: &AuditRun) -> Vec<CompactRecord> {
    latest_records(run)
        .iter()
        .filter(|r| r.status.is_surviving())
        .map(|r| r.clone().into_term().to_compact_record())
        .collect()
}

pub fn audit_json(run: &AuditRun) -> Value {
    let terms = term_reports(run);
    let count = |s: TermStatus| terms.iter().filter(|t| t.record.status == s).count();
    let surviving = terms.iter().filter(|t| t.record.status.is_surviving()).count();
    let mut failures = Vec::new();
    if let Some(e) = &run.extracted {
        failures.extend(e.failures.iter().map(|f| json!({"phase": "extracted", "item": f.item, "error": f.error})));
    }
    if let Some(r) = &run.remediated {
        failures.extend(r.failures.iter().map(|f| json!({"phase": "remediated", "item": f.item, "error": f.error})));
    }
    if let Some(p) = &run.planned {
        failures.extend(p.failures.iter().map(|f| json!({"phase": "planned", "item": f.item, "error": f.error})));
    }
    let m = &run.manifest;
    json!({
        "disclaimer": DISCLAIMER,
        "run_id": m.run_id,
        "phase": m.phase,
        "document": m.document,
        "config": m.config,
        "summary": {
            "extracted": terms.len(),
            "surviving": surviving,
            "discarded": terms.len() - surviving,
            "verified_supported": count(TermStatus::VerifiedSupported),
            "resourced": count(TermStatus::Resourced),
            "contradicted": count(TermStatus::Contradicted),
            "unverifiable": count(TermStatus::Unverifiable),
            "extracted_unverified": count(TermStatus::Extracted),
            "plans": run.planned.as_ref().map_or(0, |p| p.plans.len()),
        },
        "terms": terms,
        "coverage": run.extracted.as_ref().map(|e| &e.coverage),
        "rejected_candidates": run.extracted.as_ref().map(|e| &e.rejected),
        "warnings": run.extracted.as_ref().map(|e| &e.warnings),
        "skipped_plans": run.planned.as_ref().map(|p| &p.skipped),
        "failures": failures,
    })
}

fn cell(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|").replace('\n', " ")
}

fn status_str(s: TermStatus) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

pub fn markdown(run: &AuditRun) -> String {
    let terms = term_reports(run);
    let m = &run.manifest;
    let mut out = String::new();
    let _ = writeln!(out, "# Terms audit: {}\n", m.document.source_name);
    let _ = writeln!(out, "> {DISCLAIMER}\n");
    let _ = writeln!(
        out,
        "Run `{}` at phase `{}`; document fingerprint `{}`.\n",
        m.run_id, m.phase, m.document.fingerprint
    );
    let (kept, dropped): (Vec<_>, Vec<_>) = terms.iter().partition(|t| t.record.status.is_surviving());

    out.push_str("## Terms\n\n| # | Term | Source | Status | Label | Checks |\n|---|---|---|---|---|---|\n");
    for (i, t) in kept.iter().enumerate() {
        let label = t.label().map_or("-", Label::as_str);
        let checks = if t.plan.is_some() { t.check_count().to_string() } else { "-".into() };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            i + 1,
            cell(&t.record.term),
            cell(&t.record.source.to_string()),
            status_str(t.record.status),
            label,
            checks
        );
    }

    out.push_str("\n## Discarded terms\n\n");
    if dropped.is_empty() {
        out.push_str("None.\n");
    }
    for t in &dropped {
        let why = match (t.remediation, t.verification_error) {
            (Some(r), _) => format!("{} remediation attempt(s), no supported span", r.attempts),
            (None, Some(e)) => format!("verification failed: {e}"),
            (None, None) => "removed during processing".to_owned(),
        };
        let _ = writeln!(out, "- {} (`{}`): {}", cell(&t.record.term), t.record.source, cell(&why));
    }

    if let Some(e) = &run.extracted {
        let empty: Vec<_> = e.coverage.iter().filter(|c| c.terms_extracted == 0).collect();
        if !empty.is_empty() {
            out.push_str("\n## Chunks with no extracted terms\n\n");
            for c in empty {
                let heading = c.heading.as_deref().map(|h| format!(" ({})", cell(h))).unwrap_or_default();
                let _ = writeln!(out, "- lines {}-{}{}", c.start_line, c.end_line, heading);
            }
        }
    }

    if let Some(p) = &run.planned {
        if !p.plans.is_empty() {
            out.push_str("\n## Accountability checks\n");
            for t in &kept {
                let Some(plan) = t.plan else { continue };
                let _ = writeln!(out, "\n### {}\n", cell(&t.record.term));
                for c in &plan.possible_accountability_checks {
                    let _ = writeln!(out, "- {}", c.replace('\n', " "));
                }
            }
        }
    }
    out
}

/// Terms in a report, as domain values.
pub fn surviving_terms(run: &AuditRun) -> Vec<Term> {
    run.current_terms().into_iter().filter(|t| t.status.is_surviving()).collect()
}
