//! Chat-completion access for QA generation and answering.
//!
//! [`Gateway`] wraps a [`ChatBackend`] with the retry policy, the in-flight
//! cap and usage accounting. Two backends ship: [`HttpBackend`] for any
//! OpenAI-compatible endpoint and [`MockBackend`] for offline runs.

mod http;
mod mock;

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use http::HttpBackend;
pub use mock::{stable_hash, MockBackend, MockReply, Responder};

pub const DEFAULT_API_KEY_ENV: &str = "PSL_API_KEY";
pub const BASE_URL_ENV: &str = "PSL_BASE_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

/// Wire body of a chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// Content of the last user message, or an empty string.
    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

/// Failure of a single request attempt.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("http status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("mock backend: {0}")]
    Unscripted(String),
}

impl BackendError {
    /// 429, 5xx, timeouts and connection failures are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Status { code, .. } => *code == 429 || (500..600).contains(code),
            BackendError::Timeout | BackendError::Transport(_) => true,
            BackendError::Malformed(_) | BackendError::Unscripted(_) => false,
        }
    }
}

/// One request, one attempt. Implementations must be shareable across threads.
pub trait ChatBackend: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<Completion, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            backoff_base_ms: 500,
            backoff_cap_ms: 20_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): `base·2^(retry-1)`, capped.
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor).min(self.backoff_cap_ms))
    }
}

/// Endpoint and decoding settings. The API key itself is never stored here;
/// only the name of the environment variable that holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub base_url: String,
    pub api_key_env: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub max_inflight: usize,
    pub retry: RetryPolicy,
    pub verbose: bool,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            base_url: "http://localhost:8000/v1".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            model: "gpt-4o".into(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 120,
            max_inflight: 4,
            retry: RetryPolicy::default(),
            verbose: false,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::Config("temperature must be >= 0".into()));
        }
        if self.max_inflight == 0 {
            return Err(GatewayError::Config("max_inflight must be >= 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(GatewayError::Config("retry.max_attempts must be >= 1".into()));
        }
        Ok(())
    }

    /// Applies `PSL_BASE_URL` when set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.trim().is_empty() {
                self.base_url = url.trim().to_string();
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("request rejected: {0}")]
    Rejected(BackendError),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: BackendError },
}

/// Counters over the lifetime of a [`Gateway`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct UsageReport {
    /// Successful completions; each logical call counts at most once.
    pub completions: u64,
    pub attempts: u64,
    pub retries: u64,
    pub failures: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

struct InflightLimiter {
    max: usize,
    current: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InflightLimiter);

impl InflightLimiter {
    fn new(max: usize) -> Self {
        InflightLimiter { max, current: Mutex::new(0), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut cur = self.current.lock().unwrap();
        while *cur >= self.max {
            cur = self.freed.wait(cur).unwrap();
        }
        *cur += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.current.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    config: GatewayConfig,
    limiter: InflightLimiter,
    usage: Mutex<UsageReport>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(backend: Box<dyn ChatBackend>, config: GatewayConfig) -> Result<Gateway, GatewayError> {
        config.validate()?;
        Ok(Gateway {
            backend,
            limiter: InflightLimiter::new(config.max_inflight),
            config,
            usage: Mutex::new(UsageReport::default()),
        })
    }

    /// Mock gateway with default settings and no backoff delay.
    pub fn mock(backend: MockBackend) -> Gateway {
        let config = GatewayConfig {
            model: "mock".into(),
            retry: RetryPolicy { max_attempts: 3, backoff_base_ms: 0, backoff_cap_ms: 0 },
            ..GatewayConfig::default()
        };
        Gateway::new(Box::new(backend), config).expect("valid default config")
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn usage(&self) -> UsageReport {
        *self.usage.lock().unwrap()
    }

    /// Sends one chat completion, retrying transient failures with
    /// exponential backoff. At most `max_inflight` attempts are outstanding
    /// at any moment across all callers.
    pub fn complete(&self, messages: &[Message]) -> Result<Completion, GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::InvalidRequest("no messages".into()));
        }
        let request = ChatRequest {
            model: self.config.model.clone(),
            messages: messages.to_vec(),
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        if self.config.verbose {
            log::debug!(
                "chat request model={} messages={} chars={}",
                request.model,
                request.messages.len(),
                request.messages.iter().map(|m| m.content.len()).sum::<usize>()
            );
        }
        let policy = self.config.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.limiter.acquire();
                self.backend.send(&request)
            };
            {
                let mut u = self.usage.lock().unwrap();
                u.attempts += 1;
                if attempt > 1 {
                    u.retries += 1;
                }
            }
            match result {
                Ok(c) => {
                    let mut u = self.usage.lock().unwrap();
                    u.completions += 1;
                    u.prompt_tokens += c.usage.prompt_tokens;
                    u.completion_tokens += c.usage.completion_tokens;
                    if self.config.verbose {
                        log::debug!("chat response chars={} attempt={attempt}", c.text.len());
                    }
                    return Ok(c);
                }
                Err(e) if e.is_retryable() && attempt < policy.max_attempts => {
                    let delay = policy.backoff(attempt);
                    log::warn!("attempt {attempt} failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                }
                Err(e) => {
                    self.usage.lock().unwrap().failures += 1;
                    return Err(if e.is_retryable() {
                        GatewayError::Exhausted { attempts: attempt, last: e }
                    } else {
                        GatewayError::Rejected(e)
                    });
                }
            }
        }
    }
}
