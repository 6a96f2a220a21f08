//! Deterministic lexical overlap between a term statement and the text it
//! cites. Used as a cheap screen ahead of the semantic verifier and as the
//! objective of the fallback span search.
//!
//! Tokenization: lowercase, split on every non-alphanumeric character, drop
//! tokens shorter than two characters and stopwords, then apply the suffix
//! rules from `data/suffixes.txt`. The stopword list lives in
//! `data/stopwords.txt`.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

const STOPWORDS_DATA: &str = include_str!("../data/stopwords.txt");
const SUFFIXES_DATA: &str = include_str!("../data/suffixes.txt");

/// Score below which the verifier flags a term as `low_overlap`.
pub const DEFAULT_LOW_OVERLAP_THRESHOLD: f64 = 0.3;

fn data_lines(data: &'static str) -> impl Iterator<Item = &'static str> {
    data.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn stopwords() -> BTreeSet<&'static str> {
    data_lines(STOPWORDS_DATA).collect()
}

fn suffixes() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = data_lines(SUFFIXES_DATA).collect();
    // longest first; stable so equal lengths keep file order
    v.sort_by_key(|s| core::cmp::Reverse(s.len()));
    v
}

/// Reduces a lowercase token to its stem.
pub fn stem(token: &str) -> String {
    stem_with(token, &suffixes())
}

fn stem_with(token: &str, suffixes: &[&str]) -> String {
    let chars = token.chars().count();
    let mut out = token;
    for &suffix in suffixes {
        if out.ends_with(suffix) && chars - suffix.chars().count() >= 3 {
            out = &out[..out.len() - suffix.len()];
            break;
        }
    }
    if out.ends_with('e') && out.chars().count() > 3 {
        out = &out[..out.len() - 1];
    }
    String::from(out)
}

/// Content-token stems of `text`, as a set.
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    let stop = stopwords();
    let suffixes = suffixes();
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2 && !stop.contains(t))
        .map(|t| stem_with(t, &suffixes))
        .collect()
}

/// Fraction of the statement's content tokens that also occur in the span:
/// `|statement ∩ span| / |statement|`. A statement with no content tokens is
/// trivially covered and scores 1.0.
pub fn lexical_support_score(statement: &str, span_text: &str) -> f64 {
    let stmt = content_tokens(statement);
    let span = content_tokens(span_text);
    overlap(&stmt, &span)
}

pub(crate) fn overlap(stmt: &BTreeSet<String>, span: &BTreeSet<String>) -> f64 {
    if stmt.is_empty() {
        return 1.0;
    }
    let hit = stmt.iter().filter(|t| span.contains(*t)).count();
    hit as f64 / stmt.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scores_one() {
        let s = "Users must not rely on Output as a sole source of truth.";
        assert_eq!(lexical_support_score(s, s), 1.0);
    }

    #[test]
    fn stems() {
        assert_eq!(stem("modifying"), stem("modify"));
        assert_eq!(stem("services"), stem("service"));
        assert_eq!(stem("providers"), stem("provide"));
        assert_eq!(stem("users"), "user");
        assert_eq!(stem("use"), "use");
        assert_eq!(stem("leasing"), stem("lease"));
    }

    #[test]
    fn stopwords_and_short_tokens_dropped() {
        let t = content_tokens("You must NOT do it, OpenAI's a-b");
        let v: Vec<&str> = t.iter().map(String::as_str).collect();
        assert_eq!(v, ["openai"]);
    }

    #[test]
    fn disjoint_scores_zero() {
        assert_eq!(lexical_support_score("cookies tracking", "refund policy"), 0.0);
    }

    #[test]
    fn vacuous_statement() {
        assert_eq!(lexical_support_score("it is what it is", "anything"), 1.0);
    }
}
