//! Language-model client contract and the HTTP chat-completion client.
//!
//! Wire format (POST to the configured endpoint):
//!
//! ```json
//! {
//!   "model": "<model>",
//!   "messages": [
//!     {"role": "system", "content": "<system_text>"},
//!     {"role": "user", "content": "<user_text>"}
//!   ],
//!   "temperature": 0.3,
//!   "max_tokens": 1200,
//!   "response_format": {"type": "json_object"}
//! }
//! ```
//!
//! `response_format` is only sent for structured requests. The reply is read
//! from `choices[0].message.content`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub const ENV_ENDPOINT: &str = "REFLECTIVE_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "REFLECTIVE_LLM_API_KEY";
pub const ENV_MODEL: &str = "REFLECTIVE_LLM_MODEL";
pub const ENV_TIMEOUT_MS: &str = "REFLECTIVE_LLM_TIMEOUT_MS";
pub const ENV_MOCK: &str = "REFLECTIVE_LLM_MOCK";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    PlainText,
    Structured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub response_format: ResponseFormat,
    pub max_output: u32,
}

impl GenerationRequest {
    /// Same request with extra text appended to the user message.
    pub fn with_follow_up(&self, note: &str) -> Self {
        let mut next = self.clone();
        next.user_text = format!("{}\n\n{}", self.user_text, note);
        next
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("authentication rejected: {0}")]
    Auth(String),
}

/// Anything that can turn a [`GenerationRequest`] into model text.
///
/// Implementations must be safe to call from several threads at once.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError>;

    fn model_name(&self) -> String;
}

impl<T: LlmClient + ?Sized> LlmClient for std::sync::Arc<T> {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }

    fn model_name(&self) -> String {
        (**self).model_name()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub mock: bool,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            api_key: None,
            model: "gpt-4o-mini".into(),
            timeout_ms: 60_000,
            max_retries: 3,
            backoff_ms: 500,
            mock: false,
        }
    }
}

impl LlmConfig {
    /// Applies `REFLECTIVE_LLM_*` environment variables on top of `self`.
    pub fn with_env(mut self) -> Self {
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var(ENV_API_KEY) {
            self.api_key = Some(v);
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            self.model = v;
        }
        if let Some(ms) = std::env::var(ENV_TIMEOUT_MS).ok().and_then(|v| v.parse().ok()) {
            self.timeout_ms = ms;
        }
        if let Ok(v) = std::env::var(ENV_MOCK) {
            self.mock = matches!(v.to_ascii_lowercase().as_str(), "1" | "true" | "yes");
        }
        self
    }
}

pub struct HttpLlmClient {
    config: LlmConfig,
    agent: ureq::Agent,
}

impl HttpLlmClient {
    pub fn new(config: LlmConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        HttpLlmClient { config, agent }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn payload(&self, request: &GenerationRequest) -> serde_json::Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        });
        if request.response_format == ResponseFormat::Structured {
            body["response_format"] = json!({"type": "json_object"});
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, Attempt> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let timeout = Duration::from_millis(self.config.timeout_ms);
        match req.send_json(body) {
            Ok(resp) => {
                let text = resp.into_string().map_err(|e| {
                    if is_timeout_io(&e) {
                        Attempt::Retry(LlmError::Timeout(timeout))
                    } else {
                        Attempt::Retry(LlmError::Transport(e.to_string()))
                    }
                })?;
                extract_content(&text).map_err(Attempt::Fatal)
            }
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                match code {
                    401 | 403 => Err(Attempt::Fatal(LlmError::Auth(format!("HTTP {code}: {detail}")))),
                    429 | 500..=599 => {
                        Err(Attempt::Retry(LlmError::Transport(format!("HTTP {code}: {detail}"))))
                    }
                    _ => Err(Attempt::Fatal(LlmError::Transport(format!("HTTP {code}: {detail}")))),
                }
            }
            Err(ureq::Error::Transport(t)) => {
                if transport_timed_out(&t) {
                    Err(Attempt::Retry(LlmError::Timeout(timeout)))
                } else {
                    Err(Attempt::Retry(LlmError::Transport(t.to_string())))
                }
            }
        }
    }
}

enum Attempt {
    Retry(LlmError),
    Fatal(LlmError),
}

fn is_timeout_io(e: &std::io::Error) -> bool {
    matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock)
}

fn transport_timed_out(t: &ureq::Transport) -> bool {
    let mut source: Option<&(dyn std::error::Error + 'static)> = std::error::Error::source(t);
    while let Some(err) = source {
        if let Some(io) = err.downcast_ref::<std::io::Error>() {
            if is_timeout_io(io) {
                return true;
            }
        }
        source = err.source();
    }
    t.to_string().contains("timed out")
}

/// Pulls `choices[0].message.content` out of a chat-completion reply.
pub fn extract_content(body: &str) -> Result<String, LlmError> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| LlmError::Transport(format!("malformed completion body: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| LlmError::Transport("completion body has no choices[0].message.content".into()))
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        let body = self.payload(request);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    if attempt >= self.config.max_retries {
                        return Err(e);
                    }
                    log::warn!("LLM request failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }

    fn model_name(&self) -> String {
        self.config.model.clone()
    }
}
