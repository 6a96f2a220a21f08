//! Text-generation backends and structured-output handling.
//!
//! A [`Backend`] turns a [`BackendRequest`] into raw text. [`complete`] sits on
//! top of any backend: it pulls exactly one JSON value of the requested
//! [`ResponseSchema`] out of the reply (tolerating code fences and prose
//! around it) and reprompts once with a format reminder before giving up.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::hash::FieldHasher;
use crate::prompts;

/// Shape of the structured value an agent expects back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSchema {
    /// Array of `{term, source, applicable_to}` records.
    TermList,
    /// `{verification, justification}`.
    Verification,
    /// `{possible_accountability_checks: [...]}`.
    Plan,
    /// `{source}` proposal from the re-sourcing parser; `source` may be null.
    SourceSpan,
}

impl ResponseSchema {
    pub fn as_str(self) -> &'static str {
        match self {
            ResponseSchema::TermList => "term_list",
            ResponseSchema::Verification => "verification",
            ResponseSchema::Plan => "plan",
            ResponseSchema::SourceSpan => "source_span",
        }
    }

    /// Checks `value` against the schema, returning its normalized form.
    pub fn validate(self, value: Value) -> Result<Value, String> {
        match self {
            ResponseSchema::TermList => {
                let items = match value {
                    Value::Array(items) => items,
                    Value::Object(mut obj) => match obj.remove("terms") {
                        Some(Value::Array(items)) => items,
                        Some(_) => return Err("`terms` is not an array".into()),
                        None if obj.contains_key("term") => alloc::vec![Value::Object(obj)],
                        None => return Err("expected an array of term records".into()),
                    },
                    _ => return Err("expected an array of term records".into()),
                };
                if items.iter().any(|v| !v.is_object()) {
                    return Err("every term record must be an object".into());
                }
                Ok(Value::Array(items))
            }
            ResponseSchema::Verification => {
                let obj = value.as_object().ok_or("expected an object")?;
                let label =
                    obj.get("verification").and_then(Value::as_str).ok_or("missing string field `verification`")?;
                crate::verifier::Label::from_str(label)?;
                obj.get("justification").and_then(Value::as_str).ok_or("missing string field `justification`")?;
                Ok(value)
            }
            ResponseSchema::Plan => {
                let checks = match &value {
                    Value::Array(_) => value,
                    Value::Object(obj) => obj
                        .get("possible_accountability_checks")
                        .cloned()
                        .ok_or("missing field `possible_accountability_checks`")?,
                    _ => return Err("expected an object".into()),
                };
                let list = checks.as_array().ok_or("checks must be an array")?;
                if list.is_empty() {
                    return Err("checks list is empty".into());
                }
                for c in list {
                    let s = c.as_str().ok_or("every check must be a string")?;
                    if s.trim().is_empty() || s.chars().count() > crate::planner::MAX_CHECK_CHARS {
                        return Err("checks must be non-empty and at most 500 characters".into());
                    }
                }
                Ok(serde_json::json!({ "possible_accountability_checks": checks }))
            }
            ResponseSchema::SourceSpan => {
                let obj = value.as_object().ok_or("expected an object")?;
                match obj.get("source") {
                    Some(Value::String(_)) | Some(Value::Null) => Ok(value),
                    _ => Err("missing field `source` (string or null)".into()),
                }
            }
        }
    }
}

impl FromStr for ResponseSchema {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "term_list" => Ok(ResponseSchema::TermList),
            "verification" => Ok(ResponseSchema::Verification),
            "plan" => Ok(ResponseSchema::Plan),
            "source_span" => Ok(ResponseSchema::SourceSpan),
            other => Err(alloc::format!("unknown response schema `{other}`")),
        }
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

/// One call to an agent. The fingerprint covers every other field and is
/// recomputed on each change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRequest")]
pub struct BackendRequest {
    role_prompt: String,
    user_prompt: String,
    response_schema: ResponseSchema,
    temperature: f64,
    max_output_tokens: u32,
    request_fingerprint: String,
}

#[derive(Deserialize)]
struct RawRequest {
    role_prompt: String,
    user_prompt: String,
    response_schema: ResponseSchema,
    temperature: f64,
    max_output_tokens: u32,
    request_fingerprint: String,
}

impl TryFrom<RawRequest> for BackendRequest {
    type Error = String;

    fn try_from(r: RawRequest) -> Result<Self, String> {
        let req = BackendRequest::new(r.role_prompt, r.user_prompt, r.response_schema)
            .with_temperature(r.temperature)
            .with_max_output_tokens(r.max_output_tokens);
        if req.request_fingerprint != r.request_fingerprint {
            return Err("request fingerprint does not match its fields".into());
        }
        Ok(req)
    }
}

impl BackendRequest {
    pub fn new(role_prompt: impl Into<String>, user_prompt: impl Into<String>, schema: ResponseSchema) -> Self {
        let mut req = BackendRequest {
            role_prompt: role_prompt.into(),
            user_prompt: user_prompt.into(),
            response_schema: schema,
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            request_fingerprint: String::new(),
        };
        req.refingerprint();
        req
    }

    /// Clamped to `[0, 1]`.
    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        self.refingerprint();
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n.max(1);
        self.refingerprint();
        self
    }

    fn with_user_prompt(&self, user_prompt: String) -> Self {
        let mut req = self.clone();
        req.user_prompt = user_prompt;
        req.refingerprint();
        req
    }

    fn refingerprint(&mut self) {
        let mut h = FieldHasher::new("backend-request");
        h.field(self.role_prompt.as_bytes())
            .field(self.user_prompt.as_bytes())
            .field(self.response_schema.as_str().as_bytes())
            .field(&self.temperature.to_bits().to_le_bytes())
            .field(&self.max_output_tokens.to_le_bytes());
        self.request_fingerprint = h.finish();
    }

    pub fn role_prompt(&self) -> &str {
        &self.role_prompt
    }

    pub fn user_prompt(&self) -> &str {
        &self.user_prompt
    }

    pub fn response_schema(&self) -> ResponseSchema {
        self.response_schema
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn max_output_tokens(&self) -> u32 {
        self.max_output_tokens
    }

    pub fn fingerprint(&self) -> &str {
        &self.request_fingerprint
    }

    /// Role and user prompt as one string; what scripted matchers search.
    pub fn full_text(&self) -> String {
        let mut s = String::with_capacity(self.role_prompt.len() + self.user_prompt.len() + 2);
        s.push_str(&self.role_prompt);
        s.push_str("\n\n");
        s.push_str(&self.user_prompt);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

/// Raw output of one backend call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub raw_text: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub raw_text: String,
    /// The single structured value extracted from `raw_text`, normalized to
    /// the requested schema. Absent when extraction failed.
    pub parsed: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    pub usage: Usage,
    pub latency_ms: u64,
    pub backend_id: String,
    /// Number of calls made, 2 when a format reminder was needed.
    pub calls: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend still failing after {attempts} attempts: {detail}")]
    Transient { attempts: u32, detail: String },
    #[error("backend credential problem: {0}")]
    Auth(String),
    #[error("backend output did not contain a valid {schema} value: {detail}")]
    MalformedOutput { schema: &'static str, detail: String },
    #[error("no scripted response matches request {fingerprint}")]
    Unmatched { fingerprint: String },
    #[error("backend rejected the request: {0}")]
    Request(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

/// Anything that can answer a [`BackendRequest`] with text.
pub trait Backend: Send + Sync {
    /// Short identity recorded in responses and run configs.
    fn id(&self) -> &str;

    fn generate(&self, req: &BackendRequest) -> Result<Generation, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn generate(&self, req: &BackendRequest) -> Result<Generation, BackendError> {
        (**self).generate(req)
    }
}

impl<B: Backend + ?Sized> Backend for alloc::boxed::Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn generate(&self, req: &BackendRequest) -> Result<Generation, BackendError> {
        (**self).generate(req)
    }
}

/// Finds the JSON values embedded in `raw`, skipping prose and code fences.
fn embedded_values(raw: &str) -> Vec<Value> {
    let mut values = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let Some(off) = raw[i..].find(['{', '[']) else { break };
        let at = i + off;
        let mut stream = serde_json::Deserializer::from_str(&raw[at..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v)) => {
                values.push(v);
                i = at + stream.byte_offset();
            }
            _ => i = at + 1,
        }
    }
    values
}

/// Extracts the single structured value of `schema` from `raw`.
///
/// Term lists may also arrive as a bare comma-separated sequence of objects;
/// those are gathered into one array.
pub fn extract_structured(raw: &str, schema: ResponseSchema) -> Result<Value, String> {
    let mut values = embedded_values(raw);
    let value = match values.len() {
        0 => return Err("no JSON value found".into()),
        1 => values.pop().unwrap_or(Value::Null),
        n if schema == ResponseSchema::TermList && values.iter().all(Value::is_object) => {
            debug_assert!(n > 1);
            Value::Array(values)
        }
        n => return Err(alloc::format!("found {n} JSON values, expected exactly one")),
    };
    schema.validate(value)
}

/// Sends `req`, extracts its structured value, and reprompts once with a
/// format reminder when extraction fails.
pub fn complete<B: Backend + ?Sized>(backend: &B, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
    let first = backend.generate(req)?;
    let schema = req.response_schema();
    match extract_structured(&first.raw_text, schema) {
        Ok(v) => Ok(response(backend, first, Ok(v), 1)),
        Err(first_err) => {
            let retry = req.with_user_prompt(prompts::with_format_reminder(req.user_prompt(), schema));
            let second = backend.generate(&retry)?;
            match extract_structured(&second.raw_text, schema) {
                Ok(v) => {
                    let mut resp = response(backend, second, Ok(v), 2);
                    resp.usage.prompt_tokens += first.usage.prompt_tokens;
                    resp.usage.completion_tokens += first.usage.completion_tokens;
                    resp.latency_ms += first.latency_ms;
                    Ok(resp)
                }
                Err(e) => Err(BackendError::MalformedOutput {
                    schema: schema.as_str(),
                    detail: alloc::format!("{first_err}; after reminder: {e}"),
                }),
            }
        }
    }
}

fn response<B: Backend + ?Sized>(
    backend: &B,
    g: Generation,
    parsed: Result<Value, String>,
    calls: u32,
) -> BackendResponse {
    let (parsed, parse_error) = match parsed {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e)),
    };
    BackendResponse {
        raw_text: g.raw_text,
        parsed,
        parse_error,
        usage: g.usage,
        latency_ms: g.latency_ms,
        backend_id: backend.id().to_owned(),
        calls,
    }
}

/// How a script entry selects requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Role prompt plus user prompt contains this text.
    Substring(String),
    /// Exact request fingerprint.
    Fingerprint(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub matcher: Matcher,
    /// Restricts the entry to requests expecting this schema.
    pub schema: Option<ResponseSchema>,
    pub response: String,
}

impl ScriptEntry {
    pub fn substring(needle: impl Into<String>, response: impl Into<String>) -> Self {
        ScriptEntry { matcher: Matcher::Substring(needle.into()), schema: None, response: response.into() }
    }

    pub fn for_schema(mut self, schema: ResponseSchema) -> Self {
        self.schema = Some(schema);
        self
    }

    fn matches(&self, req: &BackendRequest, text: &str) -> bool {
        if self.schema.is_some_and(|s| s != req.response_schema()) {
            return false;
        }
        match &self.matcher {
            Matcher::Substring(needle) => text.contains(needle.as_str()),
            Matcher::Fingerprint(fp) => fp == req.fingerprint(),
        }
    }
}

/// Text returned by a non-strict [`ScriptedBackend`] for unmatched requests.
pub const DEFAULT_REFUSAL: &str = "I'm sorry, but I can't help with that request.";

/// Replays canned responses. The first entry whose matcher and schema filter
/// accept a request supplies its response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    strict: bool,
    id: String,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>, strict: bool) -> Self {
        ScriptedBackend { entries, strict, id: "scripted".to_owned() }
    }

    pub fn strict(entries: Vec<ScriptEntry>) -> Self {
        Self::new(entries, true)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }
}

fn word_count(s: &str) -> u32 {
    s.split_whitespace().count() as u32
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &BackendRequest) -> Result<Generation, BackendError> {
        let text = req.full_text();
        let raw_text = match self.entries.iter().find(|e| e.matches(req, &text)) {
            Some(e) => e.response.clone(),
            None if self.strict => return Err(BackendError::Unmatched { fingerprint: req.fingerprint().to_string() }),
            None => DEFAULT_REFUSAL.to_owned(),
        };
        Ok(Generation {
            usage: Usage { prompt_tokens: word_count(&text), completion_tokens: word_count(&raw_text) },
            raw_text,
            latency_ms: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn req() -> BackendRequest {
        BackendRequest::new("role", "106: When you use our Services", ResponseSchema::TermList)
    }

    #[test]
    fn fingerprint_tracks_fields() {
        let a = req();
        assert_eq!(a.fingerprint(), req().fingerprint());
        assert_ne!(a.fingerprint(), a.clone().with_temperature(0.5).fingerprint());
        assert_ne!(a.fingerprint(), a.clone().with_max_output_tokens(10).fingerprint());
        let b = BackendRequest::new("role", "106: When you use our Services", ResponseSchema::Plan);
        assert_ne!(a.fingerprint(), b.fingerprint());
        let json = serde_json::to_string(&a).unwrap();
        let back: BackendRequest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        let tampered = json.replace("role", "rule");
        assert!(serde_json::from_str::<BackendRequest>(&tampered).is_err());
    }

    #[test]
    fn fenced_equals_unfenced() {
        let body = r#"[{"term": "t", "source": "a:1", "applicable_to": ["user"]}]"#;
        let fenced = alloc::format!("Here you go:\n```json\n{body}\n```\nLet me know!");
        assert_eq!(
            extract_structured(&fenced, ResponseSchema::TermList),
            extract_structured(body, ResponseSchema::TermList)
        );
    }

    #[test]
    fn bare_object_sequence_becomes_list() {
        let raw = "{\"term\": \"a\"},\n{\"term\": \"b\"},";
        let v = extract_structured(raw, ResponseSchema::TermList).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert!(extract_structured(
            r#"{"verification":"Supported","justification":""} {"x":1}"#,
            ResponseSchema::Verification
        )
        .is_err());
    }

    #[test]
    fn schema_checks() {
        assert!(extract_structured(r#"{"verification": "Maybe", "justification": "x"}"#, ResponseSchema::Verification)
            .is_err());
        assert!(extract_structured(
            r#"{"verification": "supported", "justification": "x"}"#,
            ResponseSchema::Verification
        )
        .is_ok());
        assert!(extract_structured(r#"{"possible_accountability_checks": []}"#, ResponseSchema::Plan).is_err());
        assert_eq!(
            extract_structured(r#"["Check A."]"#, ResponseSchema::Plan).unwrap(),
            json!({"possible_accountability_checks": ["Check A."]})
        );
        assert!(extract_structured(r#"{"source": null}"#, ResponseSchema::SourceSpan).is_ok());
        assert!(extract_structured("no json at all", ResponseSchema::SourceSpan).is_err());
        assert_eq!(extract_structured("[]", ResponseSchema::TermList).unwrap(), json!([]));
    }

    #[test]
    fn strict_and_lenient_scripts() {
        let strict = ScriptedBackend::strict(alloc::vec![ScriptEntry::substring("nothing like it", "[]")]);
        assert!(matches!(complete(&strict, &req()), Err(BackendError::Unmatched { .. })));
        let lenient = ScriptedBackend::new(alloc::vec![], false);
        assert_eq!(lenient.generate(&req()).unwrap().raw_text, DEFAULT_REFUSAL);
        assert!(matches!(complete(&lenient, &req()), Err(BackendError::MalformedOutput { .. })));
    }

    #[test]
    fn schema_filter_and_fingerprint_matcher() {
        let r = req();
        let backend = ScriptedBackend::strict(alloc::vec![
            ScriptEntry::substring("106", "wrong").for_schema(ResponseSchema::Plan),
            ScriptEntry { matcher: Matcher::Fingerprint(r.fingerprint().into()), schema: None, response: "[]".into() },
        ]);
        let resp = complete(&backend, &r).unwrap();
        assert_eq!(resp.parsed, Some(json!([])));
        assert_eq!(resp.calls, 1);
    }

    struct Flaky(core::sync::atomic::AtomicU32);
    impl Backend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn generate(&self, _: &BackendRequest) -> Result<Generation, BackendError> {
            let n = self.0.fetch_add(1, core::sync::atomic::Ordering::SeqCst);
            let raw_text = if n == 0 { "oops".into() } else { "```\n[]\n```".into() };
            Ok(Generation { raw_text, usage: Usage::default(), latency_ms: 1 })
        }
    }

    #[test]
    fn reprompt_recovers() {
        let b = Flaky(0.into());
        let resp = complete(&b, &req()).unwrap();
        assert_eq!((resp.calls, resp.latency_ms), (2, 2));
        assert_eq!(resp.parsed, Some(json!([])));
    }
}
