//! Ingestion of raw terms-of-service text into a line-numbered document.
//!
//! Every citation in the pipeline (`name:start-end`) resolves against the
//! [`SourceDocument`] built here, so line numbering must match exactly what
//! the parser agent is shown by [`render_numbered`].

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentFormat {
    #[default]
    Plain,
    Markdown,
    Html,
}

impl FromStr for DocumentFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plain" | "txt" | "text" => Ok(DocumentFormat::Plain),
            "markdown" | "md" => Ok(DocumentFormat::Markdown),
            "html" | "htm" => Ok(DocumentFormat::Html),
            other => Err(alloc::format!("unknown document format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("document is not valid UTF-8 (first invalid byte at offset {valid_up_to})")]
    Encoding { valid_up_to: usize },
    #[error("document is empty after normalization")]
    Empty,
    #[error("first line number must be at least 1")]
    BadOffset,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("lines {start}-{end} fall outside the document (lines {first}-{last})")]
    OutOfRange { start: u32, end: u32, first: u32, last: u32 },
    #[error("citation names `{cited}` but the document is `{actual}`")]
    WrongDocument { cited: String, actual: String },
}

/// One physical line of the normalized document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub number: u32,
    pub text: String,
}

/// The canonical, immutable, line-numbered form of an ingested document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    doc_id: String,
    source_name: String,
    lines: Vec<Line>,
    fingerprint: String,
}

impl SourceDocument {
    /// Builds a document from already-normalized line texts numbered from
    /// `first_line`. Line texts must not contain `\n` or `\r`.
    pub fn from_lines<I, S>(source_name: &str, first_line: u32, texts: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if first_line == 0 {
            return Err(IngestError::BadOffset);
        }
        let lines: Vec<Line> = texts
            .into_iter()
            .zip(first_line..)
            .map(|(t, number)| {
                let text: String = t.into();
                debug_assert!(!text.contains('\n') && !text.contains('\r'));
                Line { number, text }
            })
            .collect();
        if lines.iter().all(|l| l.text.trim().is_empty()) {
            return Err(IngestError::Empty);
        }
        let mut normalized = String::new();
        for (i, l) in lines.iter().enumerate() {
            if i > 0 {
                normalized.push('\n');
            }
            normalized.push_str(&l.text);
        }
        let fingerprint = sha256_hex(normalized.as_bytes());
        Ok(SourceDocument {
            doc_id: alloc::format!("doc-{}", &fingerprint[..16]),
            source_name: source_name.to_owned(),
            lines,
            fingerprint,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn first_line(&self) -> u32 {
        self.lines[0].number
    }

    pub fn last_line(&self) -> u32 {
        self.lines[self.lines.len() - 1].number
    }

    /// Text of line `number`, if it exists.
    pub fn line(&self, number: u32) -> Option<&str> {
        let idx = number.checked_sub(self.first_line())? as usize;
        self.lines.get(idx).map(|l| l.text.as_str())
    }

    /// Slice of lines `start..=end`, or `None` when any part is out of range.
    pub fn range(&self, start: u32, end: u32) -> Option<&[Line]> {
        if start > end || start < self.first_line() || end > self.last_line() {
            return None;
        }
        let lo = (start - self.first_line()) as usize;
        let hi = (end - self.first_line()) as usize;
        Some(&self.lines[lo..=hi])
    }

    /// The normalized text: all lines joined with `\n`.
    pub fn text(&self) -> String {
        join_lines(&self.lines)
    }

    /// Whether `r` names this document and lies within its lines.
    pub fn resolves(&self, r: &SourceRef) -> bool {
        resolve_span(self, r).is_ok()
    }

    /// Reference covering the whole document.
    pub fn full_ref(&self) -> SourceRef {
        SourceRef { source_name: self.source_name.clone(), start_line: self.first_line(), end_line: self.last_line() }
    }
}

/// A citation into a document: `source_name:start_line-end_line` (inclusive).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceRef {
    pub source_name: String,
    pub start_line: u32,
    pub end_line: u32,
}

impl SourceRef {
    pub fn new(source_name: impl Into<String>, start_line: u32, end_line: u32) -> Option<Self> {
        let source_name = source_name.into();
        if source_name.is_empty() || start_line == 0 || start_line > end_line {
            return None;
        }
        Some(SourceRef { source_name, start_line, end_line })
    }

    pub fn line_span(&self) -> u32 {
        self.end_line - self.start_line + 1
    }

    pub fn with_lines(&self, start_line: u32, end_line: u32) -> Self {
        SourceRef { source_name: self.source_name.clone(), start_line, end_line }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is not a citation of the form name:start-end or name:line")]
pub struct SourceRefParseError(pub String);

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.start_line == self.end_line {
            write!(f, "{}:{}", self.source_name, self.start_line)
        } else {
            write!(f, "{}:{}-{}", self.source_name, self.start_line, self.end_line)
        }
    }
}

impl FromStr for SourceRef {
    type Err = SourceRefParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || SourceRefParseError(s.to_owned());
        let (name, range) = s.trim().rsplit_once(':').ok_or_else(err)?;
        let parse_num = |t: &str| -> Result<u32, SourceRefParseError> {
            let t = t.trim();
            if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            t.parse().map_err(|_| err())
        };
        let (start, end) = match range.split_once('-') {
            Some((a, b)) => (parse_num(a)?, parse_num(b)?),
            None => {
                let n = parse_num(range)?;
                (n, n)
            }
        };
        SourceRef::new(name.trim(), start, end).ok_or_else(err)
    }
}

impl Serialize for SourceRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SourceRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Decodes and normalizes `raw` into a document whose first line is 1.
pub fn ingest(raw: &[u8], source_name: &str, format: Option<DocumentFormat>) -> Result<SourceDocument, IngestError> {
    ingest_with_offset(raw, source_name, format, 1)
}

/// Like [`ingest`] but numbers the first line `first_line`, for excerpts that
/// must keep the numbering of the document they were cut from.
pub fn ingest_with_offset(
    raw: &[u8],
    source_name: &str,
    format: Option<DocumentFormat>,
    first_line: u32,
) -> Result<SourceDocument, IngestError> {
    let raw = raw.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(raw);
    let decoded = core::str::from_utf8(raw).map_err(|e| IngestError::Encoding { valid_up_to: e.valid_up_to() })?;
    let mut text: String = decoded.chars().filter(|&c| c != '\r').collect();
    if format == Some(DocumentFormat::Html) {
        text = html_to_text(&text);
    }
    if text.ends_with('\n') {
        text.pop();
    }
    SourceDocument::from_lines(source_name, first_line, text.split('\n'))
}

/// Renders `<n>: <text>` per line; blank lines render as bare `<n>:`.
pub fn render_numbered(doc: &SourceDocument) -> String {
    render_lines(doc.lines())
}

pub fn render_lines(lines: &[Line]) -> String {
    let mut out = String::new();
    for (i, l) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&l.number.to_string());
        out.push(':');
        if !l.text.is_empty() {
            out.push(' ');
            out.push_str(&l.text);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {index} of numbered text is malformed")]
pub struct NumberedParseError {
    pub index: usize,
}

/// Inverse of [`render_numbered`].
pub fn parse_numbered(numbered: &str) -> Result<Vec<Line>, NumberedParseError> {
    numbered
        .split('\n')
        .enumerate()
        .map(|(index, row)| {
            let bad = NumberedParseError { index };
            let (num, rest) = row.split_once(':').ok_or(bad.clone())?;
            if num.is_empty() || !num.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad);
            }
            let number = num.parse().map_err(|_| bad.clone())?;
            let text = match rest.strip_prefix(' ') {
                Some(t) => t.to_owned(),
                None if rest.is_empty() => String::new(),
                None => return Err(bad),
            };
            Ok(Line { number, text })
        })
        .collect()
}

/// Text of the cited lines joined with `\n`. Fails rather than clamping.
pub fn resolve_span(doc: &SourceDocument, r: &SourceRef) -> Result<String, SpanError> {
    if r.source_name != doc.source_name {
        return Err(SpanError::WrongDocument { cited: r.source_name.clone(), actual: doc.source_name.clone() });
    }
    let lines = doc.range(r.start_line, r.end_line).ok_or(SpanError::OutOfRange {
        start: r.start_line,
        end: r.end_line,
        first: doc.first_line(),
        last: doc.last_line(),
    })?;
    Ok(join_lines(lines))
}

fn join_lines(lines: &[Line]) -> String {
    let mut out = String::new();
    for (i, l) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&l.text);
    }
    out
}

const BLOCK_TAGS: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "br",
    "dd",
    "div",
    "dl",
    "dt",
    "footer",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hr",
    "li",
    "main",
    "nav",
    "ol",
    "p",
    "pre",
    "section",
    "table",
    "tbody",
    "td",
    "th",
    "thead",
    "tr",
    "ul",
];

/// Strips tags from HTML, keeping block structure as line breaks. Headings
/// become markdown `#` lines so section chunking still sees them. Runs of
/// more than two blank lines collapse to two.
pub fn html_to_text(html: &str) -> String {
    let mut out = String::new();
    let mut rest = html;
    // source newlines inside text are plain whitespace; structure comes from tags
    let text_run = |t: &str| decode_entities(&t.replace('\n', " "));
    while let Some(lt) = rest.find('<') {
        out.push_str(&text_run(&rest[..lt]));
        rest = &rest[lt..];
        if rest.starts_with("<!--") {
            rest = rest.find("-->").map_or("", |e| &rest[e + 3..]);
            continue;
        }
        let Some(gt) = rest.find('>') else {
            // unterminated tag: treat the rest as text
            out.push_str(&text_run(rest));
            rest = "";
            break;
        };
        let tag = &rest[1..gt];
        rest = &rest[gt + 1..];
        let closing = tag.starts_with('/');
        let name: String = tag
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        if !closing && (name == "script" || name == "style") {
            let close = alloc::format!("</{name}");
            let lower = rest.to_ascii_lowercase();
            rest = match lower.find(&close) {
                Some(p) => rest[p..].find('>').map_or("", |e| &rest[p + e + 1..]),
                None => "",
            };
            continue;
        }
        if BLOCK_TAGS.contains(&name.as_str()) {
            out.push('\n');
            let is_heading = name.len() == 2 && name.starts_with('h') && name != "hr";
            if is_heading && !closing {
                let level = (name.as_bytes()[1] - b'0') as usize;
                for _ in 0..level {
                    out.push('#');
                }
                out.push(' ');
            }
            if name == "li" && !closing {
                out.push_str("- ");
            }
        }
    }
    out.push_str(&text_run(rest));

    let mut lines: Vec<String> = Vec::new();
    let mut blank_run = 0;
    for line in out.split('\n') {
        let collapsed = collapse_spaces(line);
        if collapsed.is_empty() || collapsed == "-" {
            blank_run += 1;
            if blank_run > 2 {
                continue;
            }
            lines.push(String::new());
        } else {
            blank_run = 0;
            lines.push(collapsed);
        }
    }
    while lines.first().is_some_and(|l| l.is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

fn collapse_spaces(s: &str) -> String {
    let mut out = String::new();
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    if out.chars().all(|c| c == '#' || c == ' ') {
        return String::new();
    }
    out
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_owned();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let Some(semi) = rest[..rest.len().min(12)].find(';') else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let entity = &rest[1..semi];
        let decoded = match entity {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some(' '),
            "rsquo" | "lsquo" => Some('\''),
            "rdquo" | "ldquo" => Some('"'),
            "mdash" | "ndash" => Some('-'),
            e if e.starts_with("#x") || e.starts_with("#X") => {
                u32::from_str_radix(&e[2..], 16).ok().and_then(char::from_u32)
            }
            e if e.starts_with('#') => e[1..].parse().ok().and_then(char::from_u32),
            _ => None,
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}
