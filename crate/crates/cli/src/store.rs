//! Directory-per-run persistence.
//!
//! ```text
//! <root>/<run_id>/
//!   run.json          manifest: document identity, config, phase
//!   document.txt      normalized document text
//!   extracted.json    verified.json    remediated.json    plans.json
//!   events.jsonl      append-only event log (the only file with timestamps)
//! ```
//!
//! All writes go through one `RunStore`, so the event log is totally ordered.
//! Phase files are written to a temporary name and renamed into place.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::pipeline::Phase;

pub const MANIFEST: &str = "run.json";
pub const DOCUMENT: &str = "document.txt";
pub const EVENTS: &str = "events.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} is not a valid run file: {detail}")]
    Corrupt { path: PathBuf, detail: String },
    #[error("{0} does not contain a run (no {MANIFEST})")]
    NotARun(PathBuf),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_owned(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub phase: Phase,
    pub event: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub detail: Value,
    pub timestamp_ms: u128,
}

#[derive(Debug)]
pub struct RunStore {
    dir: PathBuf,
    next_seq: u64,
}

impl RunStore {
    /// Creates (or empties) the run directory.
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        Ok(RunStore { dir, next_seq: 0 })
    }

    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        if !dir.join(MANIFEST).is_file() {
            return Err(StoreError::NotARun(dir));
        }
        let events = dir.join(EVENTS);
        let next_seq = match fs::read_to_string(&events) {
            Ok(text) => text.lines().filter(|l| !l.trim().is_empty()).count() as u64,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(io(&events)(e)),
        };
        Ok(RunStore { dir, next_seq })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), StoreError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| StoreError::Corrupt { path: self.dir.join(name), detail: e.to_string() })?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), StoreError> {
        let dest = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, text).map_err(io(&tmp))?;
        fs::rename(&tmp, &dest).map_err(io(&dest))
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>, StoreError> {
        read_json_file(&self.dir.join(name))
    }

    pub fn read_text(&self, name: &str) -> Result<String, StoreError> {
        let path = self.dir.join(name);
        fs::read_to_string(&path).map_err(io(&path))
    }

    pub fn remove(&mut self, name: &str) -> Result<(), StoreError> {
        let path = self.dir.join(name);
        match fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io(&path)(e)),
            _ => Ok(()),
        }
    }

    pub fn append_event(&mut self, phase: Phase, event: &str, detail: Value) -> Result<(), StoreError> {
        let timestamp_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        let record = Event { seq: self.next_seq, phase, event: event.to_owned(), detail, timestamp_ms };
        let path = self.dir.join(EVENTS);
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        let mut line = serde_json::to_string(&record)
            .map_err(|e| StoreError::Corrupt { path: path.clone(), detail: e.to_string() })?;
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(io(&path))?;
        self.next_seq += 1;
        Ok(())
    }

    pub fn events(&self) -> Result<Vec<Event>, StoreError> {
        let path = self.dir.join(EVENTS);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io(&path)(e)),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l).map_err(|e| StoreError::Corrupt { path: path.clone(), detail: e.to_string() })
            })
            .collect()
    }
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, StoreError> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| StoreError::Corrupt { path: path.to_owned(), detail: e.to_string() }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io(path)(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_continue_numbering_after_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let run = dir.path().join("r");
        let mut s = RunStore::create(&run).unwrap();
        s.write_json(MANIFEST, &serde_json::json!({})).unwrap();
        s.append_event(Phase::Ingested, "a", Value::Null).unwrap();
        s.append_event(Phase::Extracted, "b", Value::Null).unwrap();
        let mut s = RunStore::open(&run).unwrap();
        s.append_event(Phase::Verified, "c", Value::Null).unwrap();
        let seqs: Vec<u64> = s.events().unwrap().iter().map(|e| e.seq).collect();
        assert_eq!(seqs, [0, 1, 2]);
    }

    #[test]
    fn open_requires_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(RunStore::open(dir.path()), Err(StoreError::NotARun(_))));
    }
}
