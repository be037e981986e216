use std::time::Duration;

use serde::Deserialize;

use super::{BackendError, ChatBackend, ChatRequest, Completion, GatewayConfig, Usage};

/// Blocking client for an OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("url", &self.url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpBackend {
    /// Reads the API key from the environment variable named in `config`.
    /// A missing key is allowed for local endpoints; requests go out without
    /// an `Authorization` header.
    pub fn from_config(config: &GatewayConfig) -> HttpBackend {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{} is not set; sending unauthenticated requests", config.api_key_env);
        }
        HttpBackend::new(&config.base_url, api_key, Duration::from_secs(config.timeout_secs))
    }

    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> HttpBackend {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpBackend {
            agent,
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
        }
    }
}

fn parse_body(body: &str) -> Result<Completion, BackendError> {
    let wire: WireResponse = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    let text = wire
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))?;
    let usage = wire
        .usage
        .map(|u| Usage { prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens })
        .unwrap_or_default();
    Ok(Completion { text, usage })
}

impl ChatBackend for HttpBackend {
    fn send(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let mut req = self.agent.post(&self.url).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::to_string(request).map_err(|e| BackendError::Malformed(e.to_string()))?;
        match req.send_string(&body) {
            Ok(resp) => {
                let body = resp.into_string().map_err(|e| BackendError::Transport(e.to_string()))?;
                parse_body(&body)
            }
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                Err(BackendError::Status { code, body: body.chars().take(500).collect() })
            }
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.contains("timed out") {
                    Err(BackendError::Timeout)
                } else {
                    Err(BackendError::Transport(msg))
                }
            }
        }
    }
}
