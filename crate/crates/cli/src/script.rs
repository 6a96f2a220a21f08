//! Script files for the scripted backend.
//!
//! A script is a JSON array of entries, or an object
//! `{"strict": bool, "entries": [...]}`. Each entry names a matcher and a
//! response:
//!
//! ```json
//! {"match": "108: Output may", "schema": "term_list", "response_file": "para.json"}
//! {"fingerprint": "9f2c…", "response": "{\"source\": null}"}
//! ```
//!
//! `response_file` paths are relative to the script file. Array scripts are
//! strict.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use terminators_core::backend::{Matcher, ScriptEntry};
use terminators_core::{ResponseSchema, ScriptedBackend};

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("script {path} is not valid: {detail}")]
    Format { path: PathBuf, detail: String },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    List(Vec<RawEntry>),
    Full {
        #[serde(default = "yes")]
        strict: bool,
        entries: Vec<RawEntry>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    #[serde(default, rename = "match")]
    substring: Option<String>,
    #[serde(default)]
    fingerprint: Option<String>,
    #[serde(default)]
    schema: Option<String>,
    #[serde(default)]
    response_file: Option<PathBuf>,
    #[serde(default)]
    response: Option<String>,
}

pub fn load_script(path: &Path) -> Result<ScriptedBackend, ScriptError> {
    let text = fs::read_to_string(path).map_err(|source| ScriptError::Io { path: path.into(), source })?;
    let bad = |detail: String| ScriptError::Format { path: path.into(), detail };
    let (strict, raw) = match serde_json::from_str::<ScriptFile>(&text).map_err(|e| bad(e.to_string()))? {
        ScriptFile::List(entries) => (true, entries),
        ScriptFile::Full { strict, entries } => (strict, entries),
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::with_capacity(raw.len());
    for (i, e) in raw.into_iter().enumerate() {
        let matcher = match (e.substring, e.fingerprint) {
            (Some(s), None) => Matcher::Substring(s),
            (None, Some(f)) => Matcher::Fingerprint(f),
            _ => return Err(bad(format!("entry {i} needs exactly one of `match` or `fingerprint`"))),
        };
        let response = match (e.response, e.response_file) {
            (Some(r), None) => r,
            (None, Some(file)) => {
                let file = base.join(file);
                fs::read_to_string(&file).map_err(|source| ScriptError::Io { path: file, source })?
            }
            _ => return Err(bad(format!("entry {i} needs exactly one of `response` or `response_file`"))),
        };
        let schema = e
            .schema
            .map(|s| s.parse::<ResponseSchema>())
            .transpose()
            .map_err(|err| bad(format!("entry {i}: {err}")))?;
        entries.push(ScriptEntry { matcher, schema, response });
    }
    let id = format!("scripted:{}", path.file_name().and_then(|n| n.to_str()).unwrap_or("script"));
    Ok(ScriptedBackend::new(entries, strict).with_id(id))
}
