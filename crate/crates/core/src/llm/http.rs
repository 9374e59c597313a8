use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{CallId, ChatMessage, ChatRequest, ChatResponse, LlmError, Provider, ProviderConfig};

/// Chat-completions client. Requests from concurrent chains are spaced by
/// at least `min_interval`.
pub struct HttpProvider {
    config: ProviderConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    min_interval: Duration,
    last_request: Mutex<Option<Instant>>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
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

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl HttpProvider {
    /// Reads the API key from the configured environment variable.
    pub fn new(config: ProviderConfig) -> Result<Self, LlmError> {
        config.validate().map_err(LlmError::Precondition)?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::Provider {
                provider: config.name.clone(),
                message: format!("environment variable {var} is not set"),
            })?),
            None => None,
        };
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
                .http_status_as_error(false)
                .build(),
        );
        Ok(HttpProvider {
            config,
            api_key,
            agent,
            min_interval: Duration::ZERO,
            last_request: Mutex::new(None),
        })
    }

    pub fn with_min_interval(mut self, d: Duration) -> Self {
        self.min_interval = d;
        self
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().expect("rate limiter");
        if let Some(t) = *last {
            let wait = self.min_interval.saturating_sub(t.elapsed());
            if !wait.is_zero() {
                thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, Attempt> {
        self.throttle();
        let body = WireRequest {
            model: &self.config.model,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(format!("HTTP {status}: {}", text.trim())));
        }
        let wire: WireResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Retry(format!("malformed response: {e}")))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Attempt::Retry("response has no message content".into()))?;
        let usage = wire.usage.unwrap_or(WireUsage { prompt_tokens: 0, completion_tokens: 0 });
        Ok(ChatResponse {
            content,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
        })
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.config.name
    }

    fn complete(&self, _id: &CallId, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let policy = self.config.retry;
        let mut last = String::new();
        for attempt in 0..=policy.max_retries {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(policy.backoff_ms.saturating_mul(1 << (attempt - 1).min(6))));
            }
            match self.attempt(request) {
                Ok(r) => return Ok(r),
                Err(Attempt::Fatal(m)) => {
                    last = m;
                    break;
                }
                Err(Attempt::Retry(m)) => {
                    log::warn!("provider `{}` attempt {} failed: {m}", self.config.name, attempt + 1);
                    last = m;
                }
            }
        }
        Err(LlmError::Provider {
            provider: self.config.name.clone(),
            message: last,
        })
    }
}
