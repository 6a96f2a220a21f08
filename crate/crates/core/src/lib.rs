//! Core of the `terminators` pipeline: turns a terms-of-service document into
//! source-anchored terms, checks each term against the lines it cites, repairs
//! or drops bad citations, and plans scenario-aware accountability checks.
//!
//! Everything here is pure and allocation-only (`no_std` + `alloc` when the
//! `std` feature is off). Language models are reached through the
//! [`backend::Backend`] trait; batch stages are driven through an
//! [`exec::Executor`] so the caller decides how much parallelism to use.
//! File IO, HTTP, caching and the command line live in the `terminators` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod backend;
pub mod chunker;
pub mod document;
pub mod exec;
mod hash;
pub mod lexical;
pub mod parser;
pub mod planner;
pub mod prompts;
pub mod remediation;
pub mod span_search;
pub mod term;
pub mod verifier;

pub use backend::{
    Backend, BackendError, BackendRequest, BackendResponse, Generation, ResponseSchema, ScriptedBackend, Usage,
};
pub use chunker::{Chunk, ChunkKind, ChunkMode, ChunkStrategy};
pub use document::{DocumentFormat, IngestError, SourceDocument, SourceRef, SpanError};
pub use exec::{Executor, Sequential};
pub use term::{PartyRole, Role, Term, TermStatus};
pub use verifier::{Label, PreCheckFlag, VerificationResult};

/// Whether a batch stage aborts on the first failing item or records the
/// failure and keeps going.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    #[default]
    FailFast,
    BestEffort,
}

pub use hash::sha256_hex;
