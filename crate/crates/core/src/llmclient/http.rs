use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{Backend, BackendConfig, BackendError, ConfigError, PromptRequest};

/// Chat-completions client. The API key is read from the configured
/// environment variable on every attempt; an unset variable sends no header.
pub struct HttpBackend {
    client: Client,
    endpoint: String,
    model: String,
    temperature: f64,
    max_tokens: u32,
    api_key_env: String,
}

impl HttpBackend {
    pub fn new(cfg: &BackendConfig) -> Result<Self, ConfigError> {
        let client = Client::builder()
            .timeout(cfg.timeout())
            .build()
            .map_err(|e| ConfigError(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            client,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            api_key_env: cfg.api_key_env.clone(),
        })
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }
}

fn retry_after_ms(headers: &reqwest::header::HeaderMap) -> Option<u64> {
    let v = headers.get(reqwest::header::RETRY_AFTER)?.to_str().ok()?;
    let secs: f64 = v.trim().parse().ok()?;
    (secs.is_finite() && secs >= 0.0).then_some((secs * 1000.0) as u64)
}

fn transport_error(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else {
        BackendError::Transport { message: e.to_string() }
    }
}

/// Pulls `choices[0].message.content` out of a reply body.
pub(crate) fn extract_content(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::Malformed {
        message: format!("invalid JSON: {e}"),
    })?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| BackendError::Malformed {
            message: "missing choices[0].message.content".into(),
        })
}

impl Backend for HttpBackend {
    fn attempt(&self, request: &PromptRequest) -> Result<String, BackendError> {
        let mut req = self.client.post(&self.endpoint).json(&self.request_body(&request.prompt));
        if let Ok(key) = std::env::var(&self.api_key_env) {
            if !key.is_empty() {
                req = req.bearer_auth(key);
            }
        }
        let resp = req.send().map_err(transport_error)?;
        let status = resp.status();
        let retry_after = retry_after_ms(resp.headers());
        let body = resp.text().map_err(transport_error)?;
        match status {
            s if s.is_success() => extract_content(&body),
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Err(BackendError::Auth { status: status.as_u16() }),
            StatusCode::TOO_MANY_REQUESTS => Err(BackendError::RateLimited {
                retry_after_ms: retry_after,
            }),
            StatusCode::REQUEST_TIMEOUT | StatusCode::GATEWAY_TIMEOUT => Err(BackendError::Timeout),
            s if s.is_server_error() => Err(BackendError::Server {
                status: s.as_u16(),
                message: body.chars().take(200).collect(),
            }),
            s => Err(BackendError::Rejected {
                message: format!("HTTP {}: {}", s.as_u16(), body.chars().take(200).collect::<String>()),
            }),
        }
    }
}
