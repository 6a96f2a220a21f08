//! The chunker against the brute-force reference splitter.

#[path = "oracles/chunk_ref.rs"]
mod chunk_ref;

use chunk_ref::{doc_strategy, mode_strategy, reference};
use proptest::prelude::*;
use terminators_core::chunker::{chunk, ChunkMode, ChunkStrategy};
use terminators_core::SourceDocument;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chunker_matches_reference(
        lines in doc_strategy(),
        mode in mode_strategy(),
        cap in 1u32..25,
        first in 1u32..500,
    ) {
        chunk_ref::check_chunker(&lines, mode, cap, first)?;
    }
}

#[test]
fn section_mode_on_a_long_synthetic_document() {
    let mut lines = Vec::new();
    for s in 1..=10 {
        lines.push(format!("{s}. Section Title {s}"));
        for p in 0..18 {
            lines.push(if p % 6 == 5 { String::new() } else { format!("Clause {s}.{p} applies to users.") });
        }
    }
    assert_eq!(lines.len(), 190);
    let doc = SourceDocument::from_lines("long.txt", 1, lines.iter().cloned()).unwrap();
    let got: Vec<(u32, u32)> =
        chunk(&doc, &ChunkStrategy::default()).iter().map(|c| (c.start_line, c.end_line)).collect();
    let want: Vec<(u32, u32)> = reference(&lines, ChunkMode::SectionBySection, 60)
        .into_iter()
        .map(|(s, e)| (s as u32 + 1, e as u32 + 1))
        .collect();
    assert_eq!(got.len(), 10);
    assert_eq!(got, want);
}
