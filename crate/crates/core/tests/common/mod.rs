#![allow(dead_code)]

use std::path::PathBuf;

use terminators_core::document::ingest_with_offset;
use terminators_core::SourceDocument;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn json(name: &str) -> serde_json::Value {
    serde_json::from_str(&fixture(name)).unwrap()
}

/// The 12-line excerpt, numbered from 106.
pub fn excerpt() -> SourceDocument {
    ingest_with_offset(fixture("openai_excerpt.txt").as_bytes(), "OpenAI_ToS.txt", None, 106).unwrap()
}

/// The unnumbered raw document whose line 28 is the copy/lease clause.
pub fn raw_doc() -> SourceDocument {
    ingest_with_offset(fixture("openai_raw.txt").as_bytes(), "OpenAI_ToS_Raw.txt", None, 1).unwrap()
}
