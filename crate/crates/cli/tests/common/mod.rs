#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// The binary with credentials and cache overrides cleared.
pub fn terminators() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_terminators"));
    c.env_remove("TERMINATORS_API_KEY").env_remove("TERMINATORS_CACHE").env_remove("RUST_LOG");
    c
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stdout_path(out: &Output) -> PathBuf {
    PathBuf::from(String::from_utf8_lossy(&out.stdout).trim())
}

/// Arguments for the composed excerpt run: paragraph extraction, supported
/// verifications, student-scenario plans.
pub fn composed_args(doc: &Path, backend: &str, out: &Path) -> Vec<String> {
    [
        "run",
        doc.to_str().unwrap(),
        "--line-offset",
        "106",
        "--strategy",
        "paragraph",
        "--provider-name",
        "OpenAI",
        "--scenario-file",
        fixture("student_scenario.txt").to_str().unwrap(),
        "--backend",
        backend,
        "--out",
        out.to_str().unwrap(),
    ]
    .map(String::from)
    .to_vec()
}

pub fn composed_backend() -> String {
    format!("scripted:{}", fixture("composed_script.json").display())
}

pub fn mismatch_args(doc: &Path, out: &Path) -> Vec<String> {
    [
        "run",
        doc.to_str().unwrap(),
        "--strategy",
        "whole",
        "--scenario-file",
        fixture("student_scenario.txt").to_str().unwrap(),
        "--backend",
        &format!("scripted:{}", fixture("mismatch_script.json").display()),
        "--out",
        out.to_str().unwrap(),
    ]
    .map(String::from)
    .to_vec()
}

/// Copies a fixture document into `dir` under its own name.
pub fn copy_doc(name: &str, dir: &Path) -> PathBuf {
    let dest = dir.join(name);
    std::fs::copy(fixture(name), &dest).unwrap();
    dest
}

pub fn report_bytes(run_dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(run_dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", run_dir.join(name).display()))
}

/// Lifecycle conservation over an audit report: every extracted term is
/// surviving or discarded, and every survivor's current source carries a
/// Supported verdict in its stored trail.
pub fn check_conservation(audit: &Value) -> Result<(), String> {
    let terms = audit["terms"].as_array().ok_or("no terms")?;
    let surviving: Vec<&Value> = terms.iter().filter(|t| t["status"] != "discarded").collect();
    let discarded = terms.len() - surviving.len();
    let s = &audit["summary"];
    if s["extracted"] != terms.len() || s["surviving"] != surviving.len() || s["discarded"] != discarded {
        return Err(format!("summary {s} disagrees with {} terms", terms.len()));
    }
    for t in surviving {
        let verdict = match t["status"].as_str() {
            Some("verified_supported") => t["verification"].clone(),
            Some("resourced") => t["remediation"]["trail"]
                .as_array()
                .and_then(|steps| steps.iter().rev().find_map(|st| st.get("verification").cloned()))
                .unwrap_or(Value::Null),
            other => return Err(format!("term {} survives with status {other:?}", t["term_id"])),
        };
        if verdict["label"] != "Supported" || verdict["source"] != t["source"] {
            return Err(format!("term {} has no Supported verdict on {}", t["term_id"], t["source"]));
        }
    }
    Ok(())
}
