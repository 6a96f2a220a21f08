//! Brute-force reference splitter for the chunker. Headings are recognized
//! with regular expressions; nothing is shared with the crate's code.

use std::sync::LazyLock;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use regex::Regex;
use terminators_core::chunker::{chunk, detect_headings, ChunkMode, ChunkStrategy};
use terminators_core::SourceDocument;

static MARKDOWN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^#{1,6}\s+(.*?)\s*#*$").unwrap());
static NUMBERED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\d{1,3}\.(?:\d{1,3}\.){0,2}|\d{1,3}(?:\.\d{1,3}){1,2})\s+(.+)$").unwrap());

pub fn ref_heading(line: &str) -> Option<String> {
    let t = line.trim();
    if let Some(c) = MARKDOWN.captures(t) {
        let text = c[1].to_string();
        return (!text.is_empty()).then_some(text);
    }
    if let Some(c) = NUMBERED.captures(t) {
        let title = c[1].trim();
        let ok = title.chars().next().is_some_and(char::is_uppercase)
            && title.chars().count() <= 60
            && title.split_whitespace().count() <= 8
            && !title.ends_with(['.', ':', ';', ',', '?', '!']);
        return ok.then(|| title.to_string());
    }
    let letters = t.chars().filter(|c| c.is_alphabetic()).count();
    (t.chars().count() <= 80 && letters >= 3 && !t.chars().any(char::is_lowercase)).then(|| t.to_string())
}

pub fn blank(s: &str) -> bool {
    s.trim().is_empty()
}

/// Trim blank lines off both ends of `idx` (indices into `lines`).
fn trim(lines: &[String], idx: &[usize]) -> Option<(usize, usize)> {
    let first = idx.iter().find(|&&i| !blank(&lines[i]))?;
    let last = idx.iter().rev().find(|&&i| !blank(&lines[i]))?;
    Some((*first, *last))
}

fn ref_paragraphs(lines: &[String], lo: usize, hi: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = lo;
    while i <= hi {
        if blank(&lines[i]) {
            i += 1;
            continue;
        }
        let s = i;
        while i < hi && !blank(&lines[i + 1]) {
            i += 1;
        }
        out.push((s, i));
        i += 1;
    }
    out
}

/// 0-based inclusive ranges, as the reference sees them.
pub fn reference(lines: &[String], mode: ChunkMode, cap: usize) -> Vec<(usize, usize)> {
    let n = lines.len();
    let heads: Vec<usize> = (0..n).filter(|&i| ref_heading(&lines[i]).is_some()).collect();
    let segments: Vec<(usize, usize)> = match mode {
        ChunkMode::WholeDocument | ChunkMode::ParallelMerge => {
            trim(lines, &(0..n).collect::<Vec<_>>()).into_iter().collect()
        }
        ChunkMode::SectionBySection if !heads.is_empty() => {
            let mut groups: Vec<Vec<usize>> = vec![Vec::new()];
            for i in 0..n {
                if heads.contains(&i) && !groups.last().unwrap().is_empty() {
                    groups.push(Vec::new());
                }
                groups.last_mut().unwrap().push(i);
            }
            groups.iter().filter_map(|g| trim(lines, g)).collect()
        }
        _ => ref_paragraphs(lines, 0, n - 1),
    };
    let mut out = Vec::new();
    for (s, e) in segments {
        if e - s < cap {
            out.push((s, e));
            continue;
        }
        let mut pack: Option<(usize, usize)> = None;
        for (ps, pe) in ref_paragraphs(lines, s, e) {
            if pe - ps + 1 > cap {
                out.extend(pack.take());
                let mut a = ps;
                while a <= pe {
                    let b = (a + cap - 1).min(pe);
                    out.push((a, b));
                    a = b + 1;
                }
                continue;
            }
            pack = match pack {
                Some((os, _)) if pe - os < cap => Some((os, pe)),
                other => {
                    out.extend(other);
                    Some((ps, pe))
                }
            };
        }
        out.extend(pack);
    }
    out
}

pub fn line_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        6 => prop::sample::select(vec![
            "You must not misuse the Services.",
            "We may change these terms at any time.",
            "Fees are non-refundable except as required by law.",
            "and agree:",
            "3 Content",
            "#hashtag is not a heading",
            "2.1 you must pay.",
            "OK",
            "Use of the API is subject to rate limits.",
        ]).prop_map(String::from),
        3 => prop::sample::select(vec!["", "   ", "\t"]).prop_map(String::from),
        1 => prop::sample::select(vec![
            "# Usage Policies",
            "## Fees ##",
            "3. Content",
            "2.1 Your Account",
            "10.2.3. Dispute Resolution",
            "TERMINATION",
            "LIMITATION OF LIABILITY",
            "  4. Privacy  ",
        ]).prop_map(String::from),
    ]
}

pub fn doc_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(line_strategy(), 1..120)
        .prop_filter("needs a non-blank line", |v| v.iter().any(|l| !blank(l)))
}

pub fn mode_strategy() -> impl Strategy<Value = ChunkMode> {
    prop::sample::select(vec![
        ChunkMode::WholeDocument,
        ChunkMode::ParallelMerge,
        ChunkMode::SectionBySection,
        ChunkMode::Paragraph,
    ])
}

/// Every chunker property for one generated document: equality with the
/// reference, order, disjointness, cap, coverage, headings and stability.
pub fn check_chunker(lines: &[String], mode: ChunkMode, cap: u32, first: u32) -> Result<(), TestCaseError> {
    let doc = SourceDocument::from_lines("d.txt", first, lines.iter().cloned()).unwrap();
    let fanout = if mode == ChunkMode::ParallelMerge { 3 } else { 1 };
    let strategy = ChunkStrategy::new(mode, cap, fanout).unwrap();
    let chunks = chunk(&doc, &strategy);

    // equality with the reference
    let got: Vec<(u32, u32)> = chunks.iter().map(|c| (c.start_line, c.end_line)).collect();
    let want: Vec<(u32, u32)> =
        reference(lines, mode, cap as usize).into_iter().map(|(s, e)| (s as u32 + first, e as u32 + first)).collect();
    prop_assert_eq!(&got, &want);

    // order and disjointness
    for w in got.windows(2) {
        prop_assert!(w[0].1 < w[1].0);
    }
    for &(s, e) in &got {
        prop_assert!(s <= e && s >= doc.first_line() && e <= doc.last_line());
        prop_assert!(e - s < cap);
    }
    // every non-blank line covered exactly once
    for l in doc.lines() {
        let n = got.iter().filter(|&&(s, e)| s <= l.number && l.number <= e).count();
        if !blank(&l.text) {
            prop_assert_eq!(n, 1);
        }
    }
    // headings are the nearest preceding heading line
    let heads: Vec<(u32, String)> =
        lines.iter().enumerate().filter_map(|(i, l)| ref_heading(l).map(|h| (i as u32 + first, h))).collect();
    prop_assert_eq!(&detect_headings(&doc), &heads);
    for c in &chunks {
        let h = heads.iter().rev().find(|h| h.0 <= c.start_line).map(|h| h.1.clone());
        prop_assert_eq!(&c.heading, &h);
    }
    // stability
    prop_assert_eq!(chunk(&doc, &strategy), chunks);
    Ok(())
}
