//! Exhaustive reference for the fallback span search: every contiguous
//! window, scored on the joined window text.
//!
//! A window is a candidate when it is minimal: removing its first or last
//! line lowers the score. The winner has the highest score, then the
//! earliest start, then the fewest lines.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use terminators_core::lexical::lexical_support_score;
use terminators_core::span_search::best_window;
use terminators_core::SourceDocument;

pub fn exhaustive(lines: &[String], statement: &str, max: usize) -> Option<(usize, usize, f64)> {
    let score = |s: usize, e: usize| lexical_support_score(statement, &lines[s..=e].join("\n"));
    let mut cands: Vec<(usize, usize, f64)> = Vec::new();
    for s in 0..lines.len() {
        for e in s..lines.len().min(s + max) {
            let sc = score(s, e);
            let minimal = if s == e { sc > 0.0 } else { sc > score(s + 1, e) && sc > score(s, e - 1) };
            if minimal {
                cands.push((s, e, sc));
            }
        }
    }
    cands.into_iter().fold(None, |best, c| match best {
        Some(b) if b.2 > c.2 => Some(b),
        Some(b) if b.2 == c.2 && (b.0, b.1 - b.0) <= (c.0, c.1 - c.0) => Some(b),
        _ => Some(c),
    })
}

pub const WORDS: &[&str] = &[
    "users",
    "must",
    "not",
    "copy",
    "lease",
    "sell",
    "services",
    "output",
    "reverse",
    "engineer",
    "decompile",
    "source",
    "code",
    "the",
    "of",
    "accuracy",
    "review",
    "fees",
    "refund",
    "account",
];

pub fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 0..7).prop_map(|w| w.join(" "))
}

/// `best_window` equals the exhaustive search for one generated case.
pub fn check_span_search(lines: &[String], statement: &str, max: u32, first: u32) -> Result<(), TestCaseError> {
    let doc = SourceDocument::from_lines("d.txt", first, lines.iter().cloned());
    prop_assume!(doc.is_ok());
    let doc = doc.unwrap();
    let got = best_window(&doc, statement, max);
    let stmt_empty = terminators_core::lexical::content_tokens(statement).is_empty();
    let want = if stmt_empty { None } else { exhaustive(lines, statement, max as usize) };
    match (got, want) {
        (None, None) => {}
        (Some(g), Some((s, e, sc))) => {
            prop_assert_eq!((g.source.start_line, g.source.end_line), (s as u32 + first, e as u32 + first));
            prop_assert!((g.score - sc).abs() < 1e-12);
            prop_assert!(g.source.line_span() <= max);
        }
        (g, w) => prop_assert!(false, "got {:?}, want {:?}", g, w),
    }
    Ok(())
}
