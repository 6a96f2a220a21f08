//! A hash-seeded random backend and the lifecycle conservation check over
//! one randomized extract, verify and remediate pipeline.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use terminators_core::backend::BackendError;
use terminators_core::chunker::{ChunkMode, ChunkStrategy};
use terminators_core::parser::{extract_document, ExtractionConfig};
use terminators_core::remediation::{discard_unverified, remediate, RemediationOptions, Resourcer};
use terminators_core::verifier::{verify_all, VerifyOptions};
use terminators_core::{
    sha256_hex, Backend, BackendRequest, FailurePolicy, Generation, Label, ResponseSchema, Sequential, SourceDocument,
    TermStatus, Usage,
};

/// Answers every request from a hash of the seed and the request.
pub struct Dice {
    pub seed: u64,
    pub doc_name: String,
    pub last_line: u32,
}

impl Dice {
    fn roll(&self, req: &BackendRequest, salt: &str) -> u64 {
        let h = sha256_hex(format!("{}:{}:{salt}", self.seed, req.fingerprint()).as_bytes());
        u64::from_str_radix(&h[..12], 16).unwrap()
    }
}

impl Backend for Dice {
    fn id(&self) -> &str {
        "dice"
    }

    fn generate(&self, req: &BackendRequest) -> Result<Generation, BackendError> {
        let r = self.roll(req, "a");
        let raw_text = match req.response_schema() {
            ResponseSchema::TermList => {
                let numbers: Vec<u32> = req
                    .user_prompt()
                    .lines()
                    .filter_map(|l| l.split_once(':').and_then(|(n, _)| n.parse().ok()))
                    .collect();
                let items: Vec<String> = numbers
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (r >> (i % 40)) & 1 == 1)
                    .map(|(i, &n)| {
                        let end = (n + (r as u32 >> 3) % 3).min(self.last_line + 1);
                        format!(
                            r#"{{"term": "Clause {} for {}", "source": "{}:{}-{}", "applicable_to": ["user"]}}"#,
                            i % 5,
                            n % 4,
                            self.doc_name,
                            n,
                            end
                        )
                    })
                    .collect();
                format!("[{}]", items.join(","))
            }
            ResponseSchema::Verification => {
                if r.is_multiple_of(11) {
                    return Err(BackendError::Transient { attempts: 3, detail: "simulated".into() });
                }
                let label = ["Supported", "Contradicted", "Unverifiable"][(r % 3) as usize];
                format!(r#"{{"verification": "{label}", "justification": "roll {r}"}}"#)
            }
            ResponseSchema::SourceSpan => match r % 4 {
                0 => r#"{"source": null}"#.to_owned(),
                k => {
                    let s = 1 + (r as u32 >> 5) % self.last_line;
                    format!(r#"{{"source": "{}:{}-{}"}}"#, self.doc_name, s, s + k as u32 - 1)
                }
            },
            ResponseSchema::Plan => r#"{"possible_accountability_checks": ["a", "b", "c"]}"#.to_owned(),
        };
        Ok(Generation { raw_text, usage: Usage::default(), latency_ms: 0 })
    }
}

/// No term is lost, and every survivor's current source carries a
/// `Supported` verification.
pub fn check_lifecycle(seed: u64, n: u32, lexical: bool, max_attempts: u32) -> Result<(), TestCaseError> {
    let lines: Vec<String> =
        (0..n).map(|i| if i % 7 == 3 { String::new() } else { format!("Clause {} for {}", i % 5, i % 4) }).collect();
    prop_assume!(lines.iter().any(|l| !l.is_empty()));
    let doc = SourceDocument::from_lines("rand.txt", 1, lines).unwrap();
    let backend = Dice { seed, doc_name: "rand.txt".into(), last_line: doc.last_line() };
    let cfg = ExtractionConfig {
        strategy: ChunkStrategy::new(ChunkMode::Paragraph, 5, 1).unwrap(),
        ..ExtractionConfig::default()
    };
    let extraction = extract_document(&doc, &cfg, &backend, &Sequential, FailurePolicy::BestEffort).unwrap();
    let terms = extraction.terms;

    let verify = VerifyOptions::default();
    let opts = RemediationOptions {
        max_attempts,
        resourcer: if lexical { Resourcer::lexical() } else { Resourcer::Llm },
        verify,
        policy: FailurePolicy::BestEffort,
    };
    let mut finals = Vec::new();
    for (term, v) in terms.iter().zip(verify_all(&terms, &doc, &backend, &verify, &Sequential)) {
        match v {
            Ok(v) => {
                let (outcome, t) = remediate(term, &v, &doc, &backend, &opts).unwrap();
                let supporting = if v.label == Label::Supported { Some(&v) } else { outcome.final_verification() };
                if t.status.is_surviving() {
                    let s = supporting.expect("survivor without a supporting verification");
                    prop_assert_eq!(s.label, Label::Supported);
                    prop_assert_eq!(&s.source, &t.source);
                    prop_assert!(doc.resolves(&t.source));
                }
                prop_assert!(matches!(
                    t.status,
                    TermStatus::VerifiedSupported | TermStatus::Resourced | TermStatus::Discarded
                ));
                prop_assert!(outcome.attempts <= max_attempts);
                finals.push(t);
            }
            Err(_) => finals.push(discard_unverified(term).unwrap()),
        }
    }
    let surviving = finals.iter().filter(|t| t.status.is_surviving()).count();
    let discarded = finals.iter().filter(|t| t.status == TermStatus::Discarded).count();
    prop_assert_eq!(terms.len(), surviving + discarded);
    Ok(())
}
