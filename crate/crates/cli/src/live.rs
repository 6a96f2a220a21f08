//! Chat-completion HTTP client for OpenAI-compatible endpoints.
//!
//! The credential comes from `TERMINATORS_API_KEY` only and is never logged
//! or written anywhere; `Debug` redacts it.

use std::fmt;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use terminators_core::{Backend, BackendError, BackendRequest, Generation, Usage};

pub const API_KEY_VAR: &str = "TERMINATORS_API_KEY";
pub const ENDPOINT_VAR: &str = "TERMINATORS_ENDPOINT";
pub const MODEL_VAR: &str = "TERMINATORS_MODEL";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Clone, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        ApiKey(key.into())
    }

    pub fn from_env() -> Result<Self, BackendError> {
        match std::env::var(API_KEY_VAR) {
            Ok(k) if !k.trim().is_empty() => Ok(ApiKey(k.trim().to_owned())),
            _ => Err(BackendError::Auth(format!("environment variable {API_KEY_VAR} is not set"))),
        }
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: ApiKey,
    /// Total tries per request, including the first.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
    pub max_concurrent: usize,
}

impl LiveConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: ApiKey) -> Self {
        LiveConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            max_attempts: 5,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            timeout: Duration::from_secs(120),
            max_concurrent: 4,
        }
    }

    /// Endpoint and model from flags, falling back to the environment and
    /// then to the defaults.
    pub fn from_env(endpoint: Option<String>, model: Option<String>) -> Result<Self, BackendError> {
        let endpoint =
            endpoint.or_else(|| std::env::var(ENDPOINT_VAR).ok()).unwrap_or_else(|| DEFAULT_ENDPOINT.to_owned());
        let model = model.or_else(|| std::env::var(MODEL_VAR).ok()).unwrap_or_else(|| DEFAULT_MODEL.to_owned());
        Ok(LiveConfig::new(endpoint, model, ApiKey::from_env()?))
    }
}

/// Counting semaphore capping in-flight requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Gate { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    client: Client,
    gate: Gate,
    id: String,
}

impl fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiveBackend").field("config", &self.config).finish_non_exhaustive()
    }
}

enum Attempt {
    Done(Generation),
    Retry { detail: String, wait: Option<Duration> },
    Fatal(BackendError),
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, BackendError> {
        let client =
            Client::builder().timeout(config.timeout).build().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let id = format!("live:{}", config.model);
        let gate = Gate::new(config.max_concurrent);
        Ok(LiveBackend { config, client, gate, id })
    }

    fn body(&self, req: &BackendRequest) -> Value {
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": req.role_prompt()},
                {"role": "user", "content": req.user_prompt()},
            ],
            "temperature": req.temperature(),
            "max_tokens": req.max_output_tokens(),
        })
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let _permit = self.gate.acquire();
        let started = Instant::now();
        let resp = match self.client.post(&self.config.endpoint).bearer_auth(&self.config.api_key.0).json(body).send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() || e.is_connect() => {
                return Attempt::Retry { detail: without_url(&e), wait: None }
            }
            Err(e) => return Attempt::Fatal(BackendError::Request(without_url(&e))),
        };
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = resp.text().unwrap_or_default();
        match status {
            s if s.is_success() => match parse_completion(&text) {
                Ok((raw_text, usage)) => {
                    Attempt::Done(Generation { raw_text, usage, latency_ms: started.elapsed().as_millis() as u64 })
                }
                Err(detail) => Attempt::Fatal(BackendError::Request(detail)),
            },
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                Attempt::Fatal(BackendError::Auth(format!("endpoint answered {status}")))
            }
            s if s == StatusCode::TOO_MANY_REQUESTS || s.is_server_error() || s == StatusCode::REQUEST_TIMEOUT => {
                Attempt::Retry { detail: format!("endpoint answered {status}"), wait: retry_after }
            }
            s => Attempt::Fatal(BackendError::Request(format!("endpoint answered {s}: {}", snippet(&text)))),
        }
    }
}

/// reqwest errors embed the URL; keep messages short and free of it.
fn without_url(e: &reqwest::Error) -> String {
    let mut msg = e.to_string();
    if let Some(url) = e.url() {
        msg = msg.replace(url.as_str(), "<endpoint>");
    }
    msg
}

fn snippet(s: &str) -> String {
    s.chars().take(200).collect()
}

fn parse_completion(text: &str) -> Result<(String, Usage), String> {
    let v: Value = serde_json::from_str(text).map_err(|e| format!("response is not JSON: {e}"))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or("response has no choices[0].message.content")?;
    let count = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).unwrap_or(0) as u32;
    Ok((
        content.to_owned(),
        Usage { prompt_tokens: count("prompt_tokens"), completion_tokens: count("completion_tokens") },
    ))
}

impl Backend for LiveBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &BackendRequest) -> Result<Generation, BackendError> {
        let body = self.body(req);
        let mut backoff = self.config.initial_backoff;
        let attempts = self.config.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Attempt::Done(g) => return Ok(g),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry { detail, wait } => {
                    tracing::warn!(attempt, %detail, fingerprint = req.fingerprint(), "transient backend failure");
                    last = detail;
                    if attempt < attempts {
                        std::thread::sleep(wait.unwrap_or(backoff).min(self.config.max_backoff));
                        backoff = (backoff * 2).min(self.config.max_backoff);
                    }
                }
            }
        }
        Err(BackendError::Transient { attempts, detail: last })
    }
}
