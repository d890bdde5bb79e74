//! OpenAI-compatible chat completions backend.
//!
//! Context frames go out as base64 data URLs in capture order, after the
//! prompt text. The API key is read from an environment variable named in
//! the config; keys never appear in manifests or logs. Connection failures
//! and 5xx responses are retried twice with doubling backoff, and the time
//! spent retrying counts toward the reported latency, because the stream
//! does not wait for anyone. Client errors (4xx) fail immediately.

use std::collections::BTreeMap;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, InferenceRequest, InferenceResult, ModelBackend};
use crate::clock::Clock;

const MAX_ATTEMPTS: u32 = 3;

fn default_timeout() -> f64 {
    30.0
}

fn default_backoff() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// API root, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// First retry delay in seconds; doubles per retry.
    #[serde(default = "default_backoff")]
    pub backoff_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl RemoteConfig {
    fn validate(&self) -> Result<(), BackendError> {
        if self.base_url.is_empty() || self.model.is_empty() || self.api_key_env.is_empty() {
            return Err(BackendError::Config(
                "remote backend needs base_url, model, and api_key_env".into(),
            ));
        }
        if !self.timeout_s.is_finite() || self.timeout_s <= 0.0 {
            return Err(BackendError::Config(format!(
                "timeout {} must be positive",
                self.timeout_s
            )));
        }
        if !self.backoff_s.is_finite() || self.backoff_s < 0.0 {
            return Err(BackendError::Config(format!(
                "backoff {} must be non-negative",
                self.backoff_s
            )));
        }
        Ok(())
    }

    pub(crate) fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

fn sniff_mime(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        "image/png"
    } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        "image/jpeg"
    } else if bytes.starts_with(b"GIF87a") || bytes.starts_with(b"GIF89a") {
        "image/gif"
    } else if bytes.len() >= 12 && &bytes[0..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        "image/webp"
    } else {
        "application/octet-stream"
    }
}

/// The JSON body one request sends, exposed so tests can pin the wire
/// format without a server.
pub fn build_request_body(config: &RemoteConfig, request: &InferenceRequest) -> Value {
    let mut content = vec![json!({"type": "text", "text": request.prompt})];
    for frame in &request.context {
        let mime = sniff_mime(&frame.payload);
        let data = base64::engine::general_purpose::STANDARD.encode(frame.payload.as_slice());
        content.push(json!({
            "type": "image_url",
            "image_url": {"url": format!("data:{mime};base64,{data}")}
        }));
    }
    let mut body = json!({
        "model": config.model,
        "messages": [{"role": "user", "content": content}],
    });
    if let Some(max) = config.max_tokens {
        body["max_tokens"] = json!(max);
    }
    body
}

fn extract_text(reply: &Value) -> Result<String, BackendError> {
    reply["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| {
            BackendError::MalformedReply(format!(
                "no choices[0].message.content in {reply}"
            ))
        })
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    requests: u64,
    retries: u64,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| BackendError::MissingApiKey(config.api_key_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(RemoteBackend {
            config,
            api_key,
            client,
            requests: 0,
            retries: 0,
        })
    }

    fn attempt(&self, body: &Value) -> Result<Value, (bool, String)> {
        let response = self
            .client
            .post(self.config.endpoint())
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| (e.is_connect() || e.is_timeout() || e.is_request(), e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err((true, format!("server returned {status}")));
        }
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err((false, format!("server returned {status}: {detail}")));
        }
        response
            .json::<Value>()
            .map_err(|e| (false, format!("unparseable reply: {e}")))
    }
}

impl ModelBackend for RemoteBackend {
    fn id(&self) -> String {
        format!("remote({})", self.config.model)
    }

    fn infer(
        &mut self,
        request: &InferenceRequest,
        clock: &Clock,
    ) -> Result<InferenceResult, BackendError> {
        self.requests += 1;
        let body = build_request_body(&self.config, request);
        let start = clock.now();
        let mut backoff = self.config.backoff_s;
        let mut attempt = 0;
        let reply = loop {
            attempt += 1;
            match self.attempt(&body) {
                Ok(reply) => break reply,
                Err((retryable, msg)) => {
                    if !retryable || attempt >= MAX_ATTEMPTS {
                        return Err(BackendError::Request(format!(
                            "attempt {attempt}/{MAX_ATTEMPTS}: {msg}"
                        )));
                    }
                    self.retries += 1;
                    std::thread::sleep(Duration::from_secs_f64(backoff));
                    backoff *= 2.0;
                }
            }
        };
        let text = extract_text(&reply)?;
        let latency = clock.now() - start;
        // a reply with no visible content is the model holding its tongue
        let is_pause = text.trim().is_empty();
        Ok(InferenceResult {
            text,
            latency,
            is_pause,
        })
    }

    fn stats(&self) -> BTreeMap<String, u64> {
        BTreeMap::from([
            ("requests".to_string(), self.requests),
            ("retries".to_string(), self.retries),
        ])
    }
}
