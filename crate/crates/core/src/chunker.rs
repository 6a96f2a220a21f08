//! Splitting a document into self-contained chunks for extraction.
//!
//! Blank lines belong to no chunk; they only delimit. Across one chunking
//! result the chunk ranges are disjoint, ordered, and together cover every
//! non-blank line exactly once.
//!
//! Section headings are recognized by three fixed rules, tried in order:
//!
//! 1. **Markdown**: one to six `#` followed by whitespace and text. The
//!    heading text is the remainder with trailing `#` and spaces removed.
//! 2. **Numbered**: one to three dot-separated groups of one to three digits
//!    containing at least one `.` (`3.`, `2.1`, `4.1.`), whitespace, then a
//!    title that starts with an uppercase letter, has at most 8 words and 60
//!    characters, and does not end in `. : ; , ? !`. The heading text is the
//!    title.
//! 3. **All caps**: at most 80 characters, at least 3 letters, and no
//!    lowercase letters. The heading text is the trimmed line.

use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{Line, SourceDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkMode {
    WholeDocument,
    ParallelMerge,
    SectionBySection,
    Paragraph,
}

impl FromStr for ChunkMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whole" | "whole_document" => Ok(ChunkMode::WholeDocument),
            "parallel" | "parallel_merge" => Ok(ChunkMode::ParallelMerge),
            "section" | "section_by_section" => Ok(ChunkMode::SectionBySection),
            "paragraph" => Ok(ChunkMode::Paragraph),
            other => Err(alloc::format!("unknown chunk strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkKind {
    Section,
    Paragraph,
    WholeDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("max_chunk_lines must be at least 1")]
    ZeroCap,
    #[error("parallel_merge needs a fanout of at least 2 (got {0})")]
    Fanout(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawStrategy")]
pub struct ChunkStrategy {
    mode: ChunkMode,
    max_chunk_lines: u32,
    parallel_fanout: u32,
}

#[derive(Deserialize)]
struct RawStrategy {
    mode: ChunkMode,
    max_chunk_lines: u32,
    parallel_fanout: u32,
}

impl TryFrom<RawStrategy> for ChunkStrategy {
    type Error = StrategyError;

    fn try_from(r: RawStrategy) -> Result<Self, StrategyError> {
        ChunkStrategy::new(r.mode, r.max_chunk_lines, r.parallel_fanout)
    }
}

/// Default cap on chunk length, in lines.
pub const DEFAULT_MAX_CHUNK_LINES: u32 = 60;

impl ChunkStrategy {
    pub fn new(mode: ChunkMode, max_chunk_lines: u32, parallel_fanout: u32) -> Result<Self, StrategyError> {
        if max_chunk_lines == 0 {
            return Err(StrategyError::ZeroCap);
        }
        let parallel_fanout = match mode {
            ChunkMode::ParallelMerge if parallel_fanout < 2 => return Err(StrategyError::Fanout(parallel_fanout)),
            ChunkMode::ParallelMerge => parallel_fanout,
            _ => 1,
        };
        Ok(ChunkStrategy { mode, max_chunk_lines, parallel_fanout })
    }

    /// One chunk for the whole document, no cap.
    pub fn whole_document() -> Self {
        ChunkStrategy { mode: ChunkMode::WholeDocument, max_chunk_lines: u32::MAX, parallel_fanout: 1 }
    }

    pub fn paragraph(max_chunk_lines: u32) -> Result<Self, StrategyError> {
        Self::new(ChunkMode::Paragraph, max_chunk_lines, 1)
    }

    pub fn mode(&self) -> ChunkMode {
        self.mode
    }

    pub fn max_chunk_lines(&self) -> u32 {
        self.max_chunk_lines
    }

    /// Number of extraction replicas per chunk (1 except for parallel_merge).
    pub fn parallel_fanout(&self) -> u32 {
        self.parallel_fanout
    }
}

impl Default for ChunkStrategy {
    fn default() -> Self {
        ChunkStrategy {
            mode: ChunkMode::SectionBySection,
            max_chunk_lines: DEFAULT_MAX_CHUNK_LINES,
            parallel_fanout: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub start_line: u32,
    pub end_line: u32,
    pub heading: Option<String>,
    pub kind: ChunkKind,
}

impl Chunk {
    pub fn contains(&self, start: u32, end: u32) -> bool {
        self.start_line <= start && end <= self.end_line
    }

    pub fn line_span(&self) -> u32 {
        self.end_line - self.start_line + 1
    }
}

/// Heading text if `line` is a heading under the documented rules.
pub fn heading_text(line: &str) -> Option<String> {
    let t = line.trim();
    markdown_heading(t).or_else(|| numbered_heading(t)).or_else(|| caps_heading(t))
}

fn markdown_heading(t: &str) -> Option<String> {
    let hashes = t.bytes().take_while(|&b| b == b'#').count();
    if !(1..=6).contains(&hashes) {
        return None;
    }
    let rest = &t[hashes..];
    if !rest.starts_with(|c: char| c.is_whitespace()) {
        return None;
    }
    let text = rest.trim().trim_end_matches('#').trim_end();
    (!text.is_empty()).then(|| String::from(text))
}

fn numbered_heading(t: &str) -> Option<String> {
    let numbering_end = t.find(|c: char| c.is_whitespace())?;
    let numbering = &t[..numbering_end];
    if !numbering.contains('.') {
        return None;
    }
    let groups = numbering.strip_suffix('.').unwrap_or(numbering);
    let mut count = 0;
    for g in groups.split('.') {
        count += 1;
        if g.is_empty() || g.len() > 3 || !g.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    if count > 3 {
        return None;
    }
    let title = t[numbering_end..].trim();
    let first = title.chars().next()?;
    if !first.is_uppercase()
        || title.chars().count() > 60
        || title.split_whitespace().count() > 8
        || title.ends_with(['.', ':', ';', ',', '?', '!'])
    {
        return None;
    }
    Some(String::from(title))
}

fn caps_heading(t: &str) -> Option<String> {
    if t.chars().count() > 80 {
        return None;
    }
    let letters = t.chars().filter(|c| c.is_alphabetic()).count();
    if letters < 3 || t.chars().any(|c| c.is_lowercase()) {
        return None;
    }
    Some(String::from(t))
}

/// Heading lines of `doc` in document order.
pub fn detect_headings(doc: &SourceDocument) -> Vec<(u32, String)> {
    doc.lines().iter().filter_map(|l| heading_text(&l.text).map(|h| (l.number, h))).collect()
}

fn is_blank(l: &Line) -> bool {
    l.text.trim().is_empty()
}

/// Maximal runs of non-blank lines within `lines`, as inclusive ranges.
fn paragraphs(lines: &[Line]) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut open: Option<(u32, u32)> = None;
    for l in lines {
        if is_blank(l) {
            if let Some(p) = open.take() {
                out.push(p);
            }
        } else {
            open = Some(match open {
                Some((s, _)) => (s, l.number),
                None => (l.number, l.number),
            });
        }
    }
    out.extend(open);
    out
}

/// Trims leading and trailing blank lines; `None` if nothing remains.
fn trimmed_extent(lines: &[Line]) -> Option<(u32, u32)> {
    let first = lines.iter().find(|l| !is_blank(l))?;
    let last = lines.iter().rev().find(|l| !is_blank(l))?;
    Some((first.number, last.number))
}

/// Splits `doc` into chunks according to `strategy`.
pub fn chunk(doc: &SourceDocument, strategy: &ChunkStrategy) -> Vec<Chunk> {
    let headings = detect_headings(doc);
    let lines = doc.lines();

    let (segments, kind): (Vec<(u32, u32)>, ChunkKind) = match strategy.mode {
        ChunkMode::WholeDocument | ChunkMode::ParallelMerge => {
            (trimmed_extent(lines).into_iter().collect(), ChunkKind::WholeDocument)
        }
        ChunkMode::Paragraph => (paragraphs(lines), ChunkKind::Paragraph),
        ChunkMode::SectionBySection if headings.is_empty() => (paragraphs(lines), ChunkKind::Paragraph),
        ChunkMode::SectionBySection => {
            let mut bounds: Vec<u32> = Vec::with_capacity(headings.len() + 1);
            if headings[0].0 != doc.first_line() {
                bounds.push(doc.first_line());
            }
            bounds.extend(headings.iter().map(|h| h.0));
            let segs = bounds
                .iter()
                .enumerate()
                .filter_map(|(i, &start)| {
                    let end = bounds.get(i + 1).map_or(doc.last_line(), |&next| next - 1);
                    trimmed_extent(doc.range(start, end)?)
                })
                .collect();
            (segs, ChunkKind::Section)
        }
    };

    let cap = strategy.max_chunk_lines;
    let mut ranges: Vec<(u32, u32)> = Vec::new();
    for (start, end) in segments {
        if end - start < cap {
            ranges.push((start, end));
            continue;
        }
        let mut open: Option<(u32, u32)> = None;
        for (ps, pe) in paragraphs(doc.range(start, end).unwrap_or(&[])) {
            if pe - ps >= cap {
                ranges.extend(open.take());
                let mut s = ps;
                while s <= pe {
                    let e = pe.min(s.saturating_add(cap - 1));
                    ranges.push((s, e));
                    s = e + 1;
                }
            } else {
                match open {
                    Some((os, _)) if pe - os < cap => open = Some((os, pe)),
                    _ => {
                        ranges.extend(open.take());
                        open = Some((ps, pe));
                    }
                }
            }
        }
        ranges.extend(open);
    }

    ranges
        .into_iter()
        .map(|(start_line, end_line)| Chunk {
            chunk_id: alloc::format!("{}:{}-{}", doc.doc_id(), start_line, end_line),
            doc_id: String::from(doc.doc_id()),
            start_line,
            end_line,
            heading: headings.iter().rev().find(|h| h.0 <= start_line).map(|h| h.1.clone()),
            kind,
        })
        .collect()
}
