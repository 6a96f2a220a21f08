//! Term-model properties: citation round trips, identifiers, dedupe against
//! a pairwise oracle, and the lifecycle table.

use std::collections::BTreeSet;

use proptest::prelude::*;
use serde_json::json;
use terminators_core::document::{parse_numbered, render_numbered};
use terminators_core::remediation::transition;
use terminators_core::term::{
    canonical_source_string, dedupe_terms, normalize_statement, term_id_for, validate_term, ValidateOptions,
};
use terminators_core::{PartyRole, Role, SourceDocument, SourceRef, Term, TermStatus};

fn source_ref() -> impl Strategy<Value = SourceRef> {
    ("[A-Za-z0-9_]{1,12}(\\.txt)?", 1u32..5000, 0u32..40)
        .prop_map(|(name, s, len)| SourceRef::new(name, s, s + len).unwrap())
}

proptest! {
    #[test]
    fn source_ref_round_trips(r in source_ref()) {
        let text = canonical_source_string(&r);
        let back: SourceRef = text.parse().unwrap();
        prop_assert_eq!(&back, &r);
        let as_json = serde_json::to_string(&r).unwrap();
        prop_assert_eq!(serde_json::from_str::<SourceRef>(&as_json).unwrap(), r);
    }

    #[test]
    fn numbered_rendering_round_trips(
        lines in prop::collection::vec("[ -~]{0,40}", 1..30),
        first in 1u32..10_000,
    ) {
        prop_assume!(lines.iter().any(|l| !l.trim().is_empty()));
        let doc = SourceDocument::from_lines("d.txt", first, lines.iter().cloned()).unwrap();
        let parsed = parse_numbered(&render_numbered(&doc)).unwrap();
        prop_assert_eq!(parsed.as_slice(), doc.lines());
    }

    #[test]
    fn term_ids_are_deterministic(stmt in "[a-zA-Z ]{1,60}", r in source_ref()) {
        let a = term_id_for(&stmt, &r);
        prop_assert_eq!(&a, &term_id_for(&stmt, &r));
        prop_assert!(a.starts_with("t-") && a.len() == 14);
        let other = r.with_lines(r.start_line, r.end_line + 1);
        prop_assert_ne!(a, term_id_for(&stmt, &other));
    }

    #[test]
    fn valid_citations_always_resolve(
        n in 1u32..40,
        first in 1u32..200,
        a in 0u32..60,
        b in 0u32..60,
    ) {
        let doc = SourceDocument::from_lines("d.txt", first, (0..n).map(|i| format!("line {i}"))).unwrap();
        let (s, e) = (first + a.min(b), first + a.max(b));
        let cand = json!({"term": "Users must pay.", "source": format!("d.txt:{s}-{e}"), "applicable_to": ["user"]});
        let res = validate_term(&cand, &doc, &ValidateOptions::default());
        let in_range = e <= doc.last_line();
        prop_assert_eq!(res.is_ok(), in_range);
        if let Err(err) = res {
            prop_assert_eq!(err.kind(), "source_range");
        }
    }
}

fn term(stmt: &str, start: u32, len: u32, label: &str) -> Term {
    let source = SourceRef::new("d.txt", start, start + len).unwrap();
    Term {
        term_id: term_id_for(stmt, &source),
        statement: stmt.to_owned(),
        source,
        applicable_to: vec![PartyRole::classify(label, None).0],
        aspect: None,
        status: TermStatus::Extracted,
        span_outside_chunk: false,
    }
}

const STATEMENTS: &[&str] = &[
    "Users must not copy the Services.",
    "users must NOT copy the services",
    "Users must not  copy the Services!",
    "Fees are non-refundable.",
    "fees are non refundable",
    "We may suspend accounts.",
];

fn term_list() -> impl Strategy<Value = Vec<Term>> {
    prop::collection::vec(
        (prop::sample::select(STATEMENTS), 1u32..30, 0u32..4, prop::sample::select(vec!["user", "provider", "OpenAI"]))
            .prop_map(|(s, start, len, l)| term(s, start, len, l)),
        0..12,
    )
}

proptest! {
    #[test]
    fn dedupe_matches_pairwise_oracle(terms in term_list()) {
        let keys: Vec<String> = terms.iter().map(|t| normalize_statement(&t.statement)).collect();
        let rank = |i: usize| (terms[i].source.line_span(), terms[i].source.start_line, i);
        // survivors: no same-key term ranks strictly before them
        let mut want: Vec<(usize, usize)> = Vec::new(); // (first-seen index of group, survivor)
        for i in 0..terms.len() {
            let beaten = (0..terms.len()).any(|j| j != i && keys[j] == keys[i] && rank(j) < rank(i));
            if !beaten {
                let group_first = (0..terms.len()).find(|&j| keys[j] == keys[i]).unwrap();
                want.push((group_first, i));
            }
        }
        want.sort_by_key(|&(g, i)| (terms[i].source.start_line, g));

        let got = dedupe_terms(terms.clone());
        prop_assert_eq!(got.len(), want.len());
        for (g, &(_, i)) in got.iter().zip(&want) {
            prop_assert_eq!(&g.statement, &terms[i].statement);
            prop_assert_eq!(&g.source, &terms[i].source);
            let labels: BTreeSet<&str> = g.applicable_to.iter().map(|p| p.raw_label.as_str()).collect();
            let expected: BTreeSet<&str> = (0..terms.len())
                .filter(|&j| keys[j] == keys[i])
                .flat_map(|j| terms[j].applicable_to.iter().map(|p| p.raw_label.as_str()))
                .collect();
            prop_assert_eq!(labels, expected);
        }
        // idempotent
        prop_assert_eq!(dedupe_terms(got.clone()), got);
    }
}

#[test]
fn lifecycle_table() {
    use TermStatus::*;
    let all = [Extracted, VerifiedSupported, Contradicted, Unverifiable, Resourced, Discarded];
    let allowed = [
        (Extracted, VerifiedSupported),
        (Extracted, Contradicted),
        (Extracted, Unverifiable),
        (Extracted, Discarded),
        (Contradicted, Resourced),
        (Contradicted, Discarded),
        (Unverifiable, Resourced),
        (Unverifiable, Discarded),
    ];
    for from in all {
        for to in all {
            assert_eq!(transition(from, to).is_ok(), allowed.contains(&(from, to)), "{from:?} -> {to:?}");
        }
    }
    assert!(!Discarded.is_surviving());
    assert!(Resourced.is_plannable() && VerifiedSupported.is_plannable() && !Unverifiable.is_plannable());
}

#[test]
fn party_aliases() {
    assert_eq!(PartyRole::classify("Users", None).0.role, Role::User);
    assert_eq!(PartyRole::classify("customer", None).0.role, Role::User);
    assert_eq!(PartyRole::classify("OpenAI", Some("OpenAI")).0.role, Role::Provider);
    let (p, unknown) = PartyRole::classify("OpenAI", None);
    assert_eq!((p.role, unknown), (Role::ThirdParty, true));
    assert_eq!(p.raw_label, "OpenAI");
}

#[test]
fn malformed_candidates_are_rejected_by_kind() {
    let doc = SourceDocument::from_lines("d.txt", 1, ["a", "b"]).unwrap();
    let opts = ValidateOptions::default();
    let kind = |v: serde_json::Value| validate_term(&v, &doc, &opts).unwrap_err().kind();
    assert_eq!(kind(json!([1])), "not_an_object");
    assert_eq!(kind(json!({"source": "d.txt:1", "applicable_to": ["user"]})), "term");
    assert_eq!(kind(json!({"term": "x", "source": "d.txt", "applicable_to": ["user"]})), "source_format");
    assert_eq!(kind(json!({"term": "x", "source": "d.txt:3", "applicable_to": ["user"]})), "source_range");
    assert_eq!(kind(json!({"term": "x", "source": "e.txt:1", "applicable_to": ["user"]})), "source_range");
    assert_eq!(kind(json!({"term": "x", "source": "d.txt:1", "applicable_to": []})), "applicable_to");
}
