//! OpenAI-compatible chat-completions client.

use std::thread;
use std::time::{Duration, Instant};

use serde_json::json;

use super::{ChatPrompt, ChatProvider, LlmError, LlmResponse, DEFAULT_MAX_TOKENS};

pub const ENDPOINT_ENV: &str = "RELAUG_LLM_ENDPOINT";
pub const API_KEY_ENV: &str = "RELAUG_LLM_API_KEY";

/// Posts `{model, temperature, max_tokens, messages}` and reads
/// `choices[0].message.content`. Transport failures, 429 and 5xx responses are
/// retried exactly once after `backoff`.
pub struct RemoteChatProvider {
    endpoint: String,
    api_key: Option<String>,
    max_tokens: u32,
    backoff: Duration,
    agent: ureq::Agent,
}

impl RemoteChatProvider {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        RemoteChatProvider {
            endpoint: endpoint.into(),
            api_key,
            max_tokens: DEFAULT_MAX_TOKENS,
            backoff: Duration::from_millis(500),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(300)).build(),
        }
    }

    /// Reads endpoint and key from `RELAUG_LLM_ENDPOINT` / `RELAUG_LLM_API_KEY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENDPOINT_ENV).map_err(|_| LlmError::Config(format!("{ENDPOINT_ENV} is not set")))?;
        Ok(Self::new(endpoint, std::env::var(API_KEY_ENV).ok()))
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, prompt: &ChatPrompt) -> Result<String, LlmError> {
        let body = json!({
            "model": prompt.model,
            "temperature": prompt.temperature,
            "max_tokens": self.max_tokens,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        });
        let mut req = self.agent.post(&self.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = req.send_json(body).map_err(map_ureq_error)?;
        let payload: serde_json::Value = resp.into_json().map_err(|e| LlmError::Transport(format!("reading body: {e}")))?;
        if let Some(err) = payload.get("error") {
            return Err(LlmError::Provider(err.to_string()));
        }
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Provider(format!("response without choices[0].message.content: {payload}")))
    }
}

impl ChatProvider for RemoteChatProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, prompt: &ChatPrompt) -> Result<LlmResponse, LlmError> {
        let start = Instant::now();
        let text = match self.attempt(prompt) {
            Err(e) if e.is_retryable() => {
                log::warn!("llm request failed ({e}); retrying once");
                thread::sleep(self.backoff);
                self.attempt(prompt)?
            }
            other => other?,
        };
        Ok(LlmResponse { raw_text: text, provider: self.name().to_string(), latency_ms: start.elapsed().as_millis() as u64 })
    }
}

pub(crate) fn map_ureq_error(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::Status(code @ (401 | 403), resp) => {
            LlmError::Auth(format!("status {code}: {}", resp.into_string().unwrap_or_default()))
        }
        ureq::Error::Status(status, resp) => LlmError::Http { status, body: resp.into_string().unwrap_or_default() },
        ureq::Error::Transport(t) => LlmError::Transport(t.to_string()),
    }
}
