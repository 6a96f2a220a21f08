//! Deterministic search for the lines that best support a statement.
//!
//! Candidates are contiguous windows of at most `max_span_lines` lines that
//! are *minimal*: dropping the window's first or last line would lower its
//! [`lexical_support_score`]. Among candidates the highest score wins; ties
//! go to the earliest start, then the shortest window. Minimality keeps
//! windows from being padded with neighbouring lines that add nothing.
//!
//! [`lexical_support_score`]: crate::lexical::lexical_support_score

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::document::{SourceDocument, SourceRef};
use crate::lexical::content_tokens;

/// Default window cap for the fallback resourcer.
pub const DEFAULT_MAX_SPAN_LINES: u32 = 5;

/// A winning window and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanMatch {
    pub source: SourceRef,
    pub score: f64,
}

pub fn best_window(doc: &SourceDocument, statement: &str, max_span_lines: u32) -> Option<SpanMatch> {
    let stmt = content_tokens(statement);
    if stmt.is_empty() || max_span_lines == 0 {
        return None;
    }
    // per line: the statement tokens it contains
    let hits: Vec<BTreeSet<&String>> = doc
        .lines()
        .iter()
        .map(|l| {
            let toks = content_tokens(&l.text);
            stmt.iter().filter(|t| toks.contains(*t)).collect()
        })
        .collect();

    let n = hits.len();
    let width = (max_span_lines as usize).min(n);
    // matched[s][k]: statement tokens covered by lines s..=s+k
    let matched: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            let mut union: BTreeSet<&String> = BTreeSet::new();
            (s..n.min(s + width))
                .map(|e| {
                    union.extend(hits[e].iter().copied());
                    union.len()
                })
                .collect()
        })
        .collect();

    let mut best: Option<(usize, usize, usize)> = None; // (matched, start, end)
    for s in 0..n {
        for (k, &m) in matched[s].iter().enumerate() {
            let minimal = if k == 0 { m > 0 } else { m > matched[s][k - 1] && m > matched[s + 1][k - 1] };
            // strictly better only: starts ascend, and lengths ascend per start
            if minimal && best.is_none_or(|(bm, _, _)| m > bm) {
                best = Some((m, s, s + k));
            }
        }
    }
    let total = stmt.len();
    best.map(|(m, s, e)| {
        let lines = doc.lines();
        SpanMatch {
            source: SourceRef {
                source_name: String::from(doc.source_name()),
                start_line: lines[s].number,
                end_line: lines[e].number,
            },
            score: m as f64 / total as f64,
        }
    })
}
