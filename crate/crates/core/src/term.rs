//! The extracted-term record, its validation against the source document,
//! and merging of duplicate extractions.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::document::{resolve_span, SourceDocument, SourceRef};
use crate::hash::FieldHasher;

/// Canonical party a term concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Provider,
    ThirdParty,
}

/// A party label as extracted, with its canonical role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyRole {
    pub role: Role,
    pub raw_label: String,
}

const USER_ALIASES: &[&str] = &["user", "users", "customer"];
const PROVIDER_ALIASES: &[&str] = &["website", "provider", "service", "company"];

impl PartyRole {
    /// Maps `raw` through the alias table. `provider_name` (for example
    /// "OpenAI") is an extra provider alias. Unknown labels become
    /// [`Role::ThirdParty`]; the second value reports that fallback.
    pub fn classify(raw: &str, provider_name: Option<&str>) -> (PartyRole, bool) {
        let key = raw.trim().to_lowercase();
        let is = |aliases: &[&str]| aliases.iter().any(|a| *a == key);
        let role = if is(USER_ALIASES) {
            Some(Role::User)
        } else if is(PROVIDER_ALIASES)
            || provider_name.is_some_and(|p| !p.trim().is_empty() && p.trim().to_lowercase() == key)
        {
            Some(Role::Provider)
        } else {
            None
        };
        let party = PartyRole { role: role.unwrap_or(Role::ThirdParty), raw_label: raw.to_owned() };
        (party, role.is_none())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermStatus {
    Extracted,
    VerifiedSupported,
    Contradicted,
    Unverifiable,
    Resourced,
    Discarded,
}

impl TermStatus {
    /// Terms that are still part of the audit (not discarded).
    pub fn is_surviving(self) -> bool {
        self != TermStatus::Discarded
    }

    /// Terms whose current source has verified as supported.
    pub fn is_plannable(self) -> bool {
        matches!(self, TermStatus::VerifiedSupported | TermStatus::Resourced)
    }
}

/// A clause extracted from the document, anchored to the lines it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub term_id: String,
    pub statement: String,
    pub source: SourceRef,
    pub applicable_to: Vec<PartyRole>,
    pub aspect: Option<String>,
    pub status: TermStatus,
    /// The citation falls (partly) outside the chunk the term was extracted
    /// from: a likely hallucinated span.
    pub span_outside_chunk: bool,
}

impl Term {
    pub fn roles(&self) -> impl Iterator<Item = Role> + '_ {
        self.applicable_to.iter().map(|p| p.role)
    }

    pub fn to_record(&self) -> TermRecord {
        TermRecord {
            term_id: self.term_id.clone(),
            term: self.statement.clone(),
            source: self.source.clone(),
            applicable_to: self.applicable_to.iter().map(|p| p.raw_label.clone()).collect(),
            roles: self.applicable_to.iter().map(|p| p.role).collect(),
            aspect: self.aspect.clone(),
            status: self.status,
            span_outside_chunk: self.span_outside_chunk,
        }
    }

    pub fn to_compact_record(&self) -> CompactRecord {
        CompactRecord {
            term: self.statement.clone(),
            source: self.source.clone(),
            applicable_to: self.applicable_to.iter().map(|p| p.raw_label.clone()).collect(),
        }
    }
}

/// Deterministic id from statement and original citation.
pub fn term_id_for(statement: &str, source: &SourceRef) -> String {
    let mut h = FieldHasher::new("term");
    h.field(statement.as_bytes()).field(source.to_string().as_bytes());
    alloc::format!("t-{}", &h.finish()[..12])
}

/// Extended serialized form used in audit files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub term_id: String,
    pub term: String,
    pub source: SourceRef,
    pub applicable_to: Vec<String>,
    pub roles: Vec<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect: Option<String>,
    pub status: TermStatus,
    #[serde(default, skip_serializing_if = "is_false")]
    pub span_outside_chunk: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl TermRecord {
    pub fn into_term(self) -> Term {
        let applicable_to = self
            .applicable_to
            .into_iter()
            .zip(self.roles.into_iter().chain(core::iter::repeat(Role::ThirdParty)))
            .map(|(raw_label, role)| PartyRole { role, raw_label })
            .collect();
        Term {
            term_id: self.term_id,
            statement: self.term,
            source: self.source,
            applicable_to,
            aspect: self.aspect,
            status: self.status,
            span_outside_chunk: self.span_outside_chunk,
        }
    }
}

/// The three-field record shape: `term`, `source`, `applicable_to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactRecord {
    pub term: String,
    pub source: SourceRef,
    pub applicable_to: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("candidate is not an object")]
    NotAnObject,
    #[error("missing or invalid field `{0}`")]
    Field(&'static str),
    #[error("source `{0}` is not of the form name:start-end or name:line")]
    SourceFormat(String),
    #[error("source `{cited}` does not resolve in the document: {reason}")]
    SourceRange { cited: String, reason: String },
}

impl SchemaError {
    /// Short machine-readable kind, used in coverage reports.
    pub fn kind(&self) -> &'static str {
        match self {
            SchemaError::NotAnObject => "not_an_object",
            SchemaError::Field(f) => f,
            SchemaError::SourceFormat(_) => "source_format",
            SchemaError::SourceRange { .. } => "source_range",
        }
    }
}

/// Options that shape validation.
#[derive(Debug, Clone, Default)]
pub struct ValidateOptions<'a> {
    pub provider_name: Option<&'a str>,
    pub aspect: Option<&'a str>,
}

/// A validated term plus non-fatal notes (e.g. unknown party labels).
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub term: Term,
    pub warnings: Vec<String>,
}

/// Checks one raw candidate record from the backend and turns it into a
/// [`Term`] in status `extracted`.
pub fn validate_term(
    candidate: &Value,
    doc: &SourceDocument,
    opts: &ValidateOptions<'_>,
) -> Result<Validated, SchemaError> {
    let obj = candidate.as_object().ok_or(SchemaError::NotAnObject)?;
    let statement = obj
        .get("term")
        .and_then(Value::as_str)
        .map(collapse_whitespace)
        .filter(|s| !s.is_empty())
        .ok_or(SchemaError::Field("term"))?;
    let source_str = obj.get("source").and_then(Value::as_str).ok_or(SchemaError::Field("source"))?;
    let labels: Vec<&str> = match obj.get("applicable_to") {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::trim).filter(|s| !s.is_empty()))
            .collect::<Option<Vec<_>>>()
            .filter(|v| !v.is_empty())
            .ok_or(SchemaError::Field("applicable_to"))?,
        Some(Value::String(s)) if !s.trim().is_empty() => alloc::vec![s.trim()],
        _ => return Err(SchemaError::Field("applicable_to")),
    };
    let source: SourceRef = source_str.parse().map_err(|_| SchemaError::SourceFormat(source_str.to_owned()))?;
    resolve_span(doc, &source)
        .map_err(|e| SchemaError::SourceRange { cited: source_str.to_owned(), reason: e.to_string() })?;

    let mut warnings = Vec::new();
    let mut applicable_to: Vec<PartyRole> = Vec::new();
    for label in labels {
        if applicable_to.iter().any(|p| p.raw_label == label) {
            continue;
        }
        let (party, unknown) = PartyRole::classify(label, opts.provider_name);
        if unknown {
            warnings.push(alloc::format!("unknown party label `{label}` mapped to third_party"));
        }
        applicable_to.push(party);
    }
    Ok(Validated {
        term: Term {
            term_id: term_id_for(&statement, &source),
            statement,
            source,
            applicable_to,
            aspect: opts.aspect.map(ToOwned::to_owned),
            status: TermStatus::Extracted,
            span_outside_chunk: false,
        },
        warnings,
    })
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `name:start-end`, or `name:start` for a single line.
pub fn canonical_source_string(r: &SourceRef) -> String {
    r.to_string()
}

/// Lowercased, punctuation stripped, whitespace collapsed.
pub fn normalize_statement(statement: &str) -> String {
    let kept: String =
        statement.chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect::<String>().to_lowercase();
    collapse_whitespace(&kept)
}

/// Merges terms whose normalized statements are identical. The survivor of
/// each group is the one with the narrowest span (ties: smallest start line,
/// then first seen); party labels are unioned. Output is ordered by start
/// line, ties in first-seen order.
pub fn dedupe_terms(terms: Vec<Term>) -> Vec<Term> {
    let mut groups: BTreeMap<String, usize> = BTreeMap::new();
    let mut merged: Vec<Term> = Vec::new();
    for term in terms {
        let key = normalize_statement(&term.statement);
        match groups.get(&key) {
            None => {
                groups.insert(key, merged.len());
                merged.push(term);
            }
            Some(&idx) => {
                let kept = &mut merged[idx];
                let narrower = (term.source.line_span(), term.source.start_line)
                    < (kept.source.line_span(), kept.source.start_line);
                let mut parties = if narrower {
                    let old = core::mem::replace(kept, term);
                    old.applicable_to
                } else {
                    term.applicable_to
                };
                // union in survivor-first order
                let mut union = core::mem::take(&mut kept.applicable_to);
                for p in parties.drain(..) {
                    if !union.iter().any(|q| q.raw_label == p.raw_label) {
                        union.push(p);
                    }
                }
                kept.applicable_to = union;
            }
        }
    }
    merged.sort_by_key(|t| t.source.start_line);
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::ingest;
    use serde_json::json;

    fn doc(n: usize) -> SourceDocument {
        let lines: Vec<String> = (1..=n).map(|i| alloc::format!("line {i}")).collect();
        SourceDocument::from_lines("WebsiteToS.txt", 1, lines).unwrap()
    }

    #[test]
    fn validates_compact_shape() {
        let d = doc(80);
        let v = validate_term(
            &json!({
                "term": "This website will not share personally identifying information",
                "source": "WebsiteToS.txt:70-72",
                "applicable_to": ["website"]
            }),
            &d,
            &ValidateOptions::default(),
        )
        .unwrap();
        assert_eq!(v.term.statement, "This website will not share personally identifying information");
        assert_eq!((v.term.source.start_line, v.term.source.end_line), (70, 72));
        assert_eq!(v.term.applicable_to, [PartyRole { role: Role::Provider, raw_label: "website".into() }]);
        assert_eq!(v.term.status, TermStatus::Extracted);
        assert!(v.warnings.is_empty());
    }

    #[test]
    fn schema_errors() {
        let d = doc(10);
        let o = ValidateOptions::default();
        let e = validate_term(&json!({"term": "x", "source": "WebsiteToS.txt:1"}), &d, &o);
        assert_eq!(e.unwrap_err(), SchemaError::Field("applicable_to"));
        let e = validate_term(&json!({"term": "x", "source": "WebsiteToS.txt:1", "applicable_to": []}), &d, &o);
        assert_eq!(e.unwrap_err(), SchemaError::Field("applicable_to"));
        let e = validate_term(&json!({"source": "WebsiteToS.txt:1", "applicable_to": ["user"]}), &d, &o);
        assert_eq!(e.unwrap_err(), SchemaError::Field("term"));
        let e = validate_term(&json!({"term": "x", "source": "lines 3 to 4", "applicable_to": ["user"]}), &d, &o);
        assert_eq!(e.unwrap_err().kind(), "source_format");
        let e =
            validate_term(&json!({"term": "x", "source": "WebsiteToS.txt:9-11", "applicable_to": ["user"]}), &d, &o);
        assert_eq!(e.unwrap_err().kind(), "source_range");
        let e = validate_term(&json!({"term": "x", "source": "Other.txt:1", "applicable_to": ["user"]}), &d, &o);
        assert_eq!(e.unwrap_err().kind(), "source_range");
        assert_eq!(validate_term(&json!([1]), &d, &o).unwrap_err(), SchemaError::NotAnObject);
    }

    #[test]
    fn party_aliases() {
        let (p, unknown) = PartyRole::classify("OpenAI", Some("OpenAI"));
        assert_eq!((p.role, unknown), (Role::Provider, false));
        let (p, unknown) = PartyRole::classify("Users", None);
        assert_eq!((p.role, unknown), (Role::User, false));
        let (p, unknown) = PartyRole::classify("advertisers", Some("OpenAI"));
        assert_eq!((p.role, unknown, p.raw_label.as_str()), (Role::ThirdParty, true, "advertisers"));

        let d = ingest(b"a\nb", "d.txt", None).unwrap();
        let v = validate_term(
            &json!({"term": "t", "source": "d.txt:1", "applicable_to": ["OpenAI"]}),
            &d,
            &ValidateOptions::default(),
        )
        .unwrap();
        assert_eq!(v.term.applicable_to[0].role, Role::ThirdParty);
        assert_eq!(v.warnings.len(), 1);
    }

    #[test]
    fn record_round_trip() {
        let d = doc(5);
        let t = validate_term(
            &json!({"term": "Users pay.", "source": "WebsiteToS.txt:2-3", "applicable_to": ["users", "Acme"]}),
            &d,
            &ValidateOptions { provider_name: Some("Acme"), aspect: Some("payments") },
        )
        .unwrap()
        .term;
        let json = serde_json::to_string(&t.to_record()).unwrap();
        let back: TermRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_term(), t);
        let compact = serde_json::to_string(&t.to_compact_record()).unwrap();
        assert_eq!(compact, r#"{"term":"Users pay.","source":"WebsiteToS.txt:2-3","applicable_to":["users","Acme"]}"#);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_statement("  Users MUST, not;  rely. "), "users must not rely");
    }
}
