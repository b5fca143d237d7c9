//! Prompt dispatch to a chat-completions endpoint, a deterministic mock, or
//! the nearest-centroid baseline.
//!
//! [`classify_one`] owns the retry loop; [`classify_batch`] runs it over many
//! prompts on a bounded pool of scoped threads and returns results in input
//! order.

pub mod baseline;
mod http;
pub mod mock;
pub mod transcript;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::promptkit::Exemplar;
use crate::stats::StatSummary;

pub use baseline::{baseline_predict, BaselineBackend, BaselineError};
pub use http::HttpBackend;
pub use mock::MockBackend;

pub const DEFAULT_API_KEY_ENV: &str = "AMC_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Mock,
    Baseline,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Http => "http",
            BackendKind::Mock => "mock",
            BackendKind::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Full chat-completions URL, e.g. `http://host:8000/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub concurrency: usize,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub retry_base_ms: u64,
    pub retry_max_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Baseline,
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".to_string(),
            model: "local-model".to_string(),
            temperature: 0.0,
            max_tokens: 16,
            timeout_ms: 60_000,
            max_retries: 3,
            concurrency: 4,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            retry_base_ms: 500,
            retry_max_ms: 16_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid backend configuration: {0}")]
pub struct ConfigError(pub String);

impl BackendConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.concurrency == 0 {
            return Err(ConfigError("concurrency must be at least 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ConfigError(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(ConfigError("max_tokens must be at least 1".into()));
        }
        if self.kind == BackendKind::Http && self.endpoint.trim().is_empty() {
            return Err(ConfigError("http backend needs an endpoint".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    /// Model label for reports: the configured model for HTTP, the kind otherwise.
    pub fn model_label(&self) -> String {
        match self.kind {
            BackendKind::Http => self.model.clone(),
            other => other.as_str().to_string(),
        }
    }
}

/// A failed attempt or a terminal failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited { retry_after_ms: Option<u64> },
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16 },
    #[error("malformed backend reply: {message}")]
    Malformed { message: String },
    #[error("transport error: {message}")]
    Transport { message: String },
    #[error("server error (HTTP {status}): {message}")]
    Server { status: u16, message: String },
    #[error("request rejected: {message}")]
    Rejected { message: String },
    #[error("empty prompt")]
    EmptyPrompt,
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Timeout
                | BackendError::RateLimited { .. }
                | BackendError::Transport { .. }
                | BackendError::Server { .. }
        )
    }
}

/// A rendered prompt plus the structured data behind it. Only the baseline
/// backend reads the structured part.
#[derive(Debug, Clone)]
pub struct PromptRequest {
    pub prompt: String,
    pub query: Option<StatSummary>,
    pub exemplars: Arc<Vec<Exemplar>>,
}

impl PromptRequest {
    pub fn text(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            query: None,
            exemplars: Arc::new(Vec::new()),
        }
    }
}

pub trait Backend: Send + Sync {
    /// One attempt, no retries.
    fn attempt(&self, request: &PromptRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawResponse {
    pub outcome: Result<String, BackendError>,
    pub latency: Duration,
    pub attempts: u32,
}

impl RawResponse {
    pub fn text(&self) -> Option<&str> {
        self.outcome.as_deref().ok()
    }

    pub fn error(&self) -> Option<&BackendError> {
        self.outcome.as_ref().err()
    }
}

pub fn make_backend(cfg: &BackendConfig) -> Result<Box<dyn Backend>, ConfigError> {
    cfg.validate()?;
    Ok(match cfg.kind {
        BackendKind::Http => Box::new(HttpBackend::new(cfg)?),
        BackendKind::Mock => Box::new(MockBackend),
        BackendKind::Baseline => Box::new(BaselineBackend),
    })
}

fn backoff_delay(cfg: &BackendConfig, attempt: u32, err: &BackendError) -> Duration {
    let exp = cfg.retry_base_ms.saturating_mul(1u64 << (attempt - 1).min(20));
    let capped = exp.min(cfg.retry_max_ms);
    let jitter: f64 = rand::rng().random_range(0.5..=1.0);
    let mut ms = (capped as f64 * jitter) as u64;
    if let BackendError::RateLimited {
        retry_after_ms: Some(after),
    } = err
    {
        ms = ms.max((*after).min(cfg.retry_max_ms));
    }
    Duration::from_millis(ms)
}

/// Sends one prompt, retrying transport failures, timeouts, 5xx and rate
/// limits with jittered exponential backoff. At most `max_retries + 1` attempts.
pub fn classify_one(backend: &dyn Backend, request: &PromptRequest, cfg: &BackendConfig) -> RawResponse {
    let start = Instant::now();
    if request.prompt.trim().is_empty() {
        return RawResponse {
            outcome: Err(BackendError::EmptyPrompt),
            latency: start.elapsed(),
            attempts: 0,
        };
    }
    let mut attempts = 0;
    loop {
        attempts += 1;
        let result = catch_unwind(AssertUnwindSafe(|| backend.attempt(request))).unwrap_or_else(|_| {
            Err(BackendError::Rejected {
                message: "backend panicked".into(),
            })
        });
        match result {
            Ok(text) => {
                return RawResponse {
                    outcome: Ok(text),
                    latency: start.elapsed(),
                    attempts,
                }
            }
            Err(err) if err.is_retryable() && attempts <= cfg.max_retries => {
                log::debug!("attempt {attempts} failed ({err}), retrying");
                std::thread::sleep(backoff_delay(cfg, attempts, &err));
            }
            Err(err) => {
                return RawResponse {
                    outcome: Err(err),
                    latency: start.elapsed(),
                    attempts,
                }
            }
        }
    }
}

/// Completed-item counter shared with an observer.
#[derive(Debug, Clone, Default)]
pub struct BatchProgress(Arc<AtomicUsize>);

impl BatchProgress {
    pub fn completed(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
}

/// Classifies every request with at most `cfg.concurrency` in flight.
/// `on_done(index, response)` runs on a worker thread as each item finishes.
pub fn classify_batch<F>(
    backend: &dyn Backend,
    requests: &[PromptRequest],
    cfg: &BackendConfig,
    progress: &BatchProgress,
    on_done: F,
) -> Vec<RawResponse>
where
    F: Fn(usize, &RawResponse) + Sync,
{
    let slots: Vec<OnceLock<RawResponse>> = (0..requests.len()).map(|_| OnceLock::new()).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.concurrency.max(1).min(requests.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= requests.len() {
                    break;
                }
                let response = classify_one(backend, &requests[i], cfg);
                on_done(i, &response);
                let _ = slots[i].set(response);
                progress.0.fetch_add(1, Ordering::Relaxed);
            });
        }
    });

    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("every slot is filled before the scope ends"))
        .collect()
}
