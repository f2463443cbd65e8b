//! Chat-completion transport: the client trait and an OpenAI-compatible
//! HTTP implementation with retry and exponential backoff.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned {status}: {message}")]
    Endpoint { status: u16, message: String },
    #[error("malformed response: {0}")]
    Response(String),
    #[error("client configuration: {0}")]
    Config(String),
    #[error("mock client: {0}")]
    Mock(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stop: Vec<String>,
    /// Per-request seed; forwarded to endpoints that accept one and used by
    /// the mock client.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.9,
            top_p: 0.9,
            max_tokens: 1024,
            stop: Vec::new(),
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        for (name, v) in [("temperature", self.temperature), ("top_p", self.top_p)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ClientError::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if self.max_tokens == 0 {
            return Err(ClientError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ClientError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { retries: 3, base_delay_ms: 1000 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1 << attempt.min(16)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

fn default_timeout() -> u64 {
    120
}

pub struct HttpClient {
    http: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl HttpClient {
    /// Reads the credential from the configured environment variable; a
    /// missing variable means unauthenticated requests.
    pub fn new(cfg: &EndpointConfig) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpClient {
            http,
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            model: cfg.model.clone(),
            api_key: std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty()),
            retry: cfg.retry,
        })
    }

    fn body(&self, req: &CompletionRequest) -> serde_json::Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_tokens,
        });
        if !req.stop.is_empty() {
            body["stop"] = json!(req.stop);
        }
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, ClientError)> {
        let mut rb = self.http.post(&self.url).json(body);
        if let Some(k) = &self.api_key {
            rb = rb.bearer_auth(k);
        }
        let resp = rb.send().map_err(|e| (true, ClientError::Transport(e.to_string())))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| (true, ClientError::Transport(e.to_string())))?;
        if !status.is_success() {
            let retryable = status.is_server_error() || status.as_u16() == 429;
            let message = serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .and_then(|v| v["error"]["message"].as_str().map(str::to_string))
                .unwrap_or(text);
            return Err((retryable, ClientError::Endpoint { status: status.as_u16(), message }));
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| (false, ClientError::Response(e.to_string())))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (false, ClientError::Response("missing choices[0].message.content".into())))
    }
}

impl CompletionClient for HttpClient {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ClientError> {
        req.validate()?;
        let body = self.body(req);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((true, e)) if attempt < self.retry.retries => {
                    log::warn!("request failed ({e}); retrying");
                    thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
                Err((_, e)) => return Err(e),
            }
        }
    }
}
