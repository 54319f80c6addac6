//! Chat-completion and embedding access behind one gateway, with call
//! accounting, an optional audit log and JSON recovery helpers.

mod embed;
mod json;
mod remote;
mod stub;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

pub use embed::{cosine, trigram_embedding, trigrams, Embedder, RemoteEmbedder, TrigramEmbedder, TRIGRAM_DIM};
pub use json::extract_json;
pub use remote::{RemoteChatProvider, API_KEY_ENV, ENDPOINT_ENV};
pub use stub::{StubBehavior, StubProvider, StubScript};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const DEFAULT_MAX_TOKENS: u32 = 4096;

/// Instruction appended to the user message when a response had no parseable JSON.
pub const JSON_REASK: &str = "Return only valid JSON.";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("provider error: {0}")]
    Provider(String),
    #[error("unparseable response: {0}")]
    Parse(String),
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("configuration: {0}")]
    Config(String),
}

impl LlmError {
    pub(crate) fn is_retryable(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Http { status, .. } => *status >= 500 || *status == 429,
            _ => false,
        }
    }
}

/// Which pipeline stage a prompt belongs to. Stub scripts are keyed by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Descriptions,
    TableScoring,
    FeatureRanking,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Descriptions => "descriptions",
            PromptKind::TableScoring => "table_scoring",
            PromptKind::FeatureRanking => "feature_ranking",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatPrompt {
    pub kind: PromptKind,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub model: String,
}

impl ChatPrompt {
    pub fn new(kind: PromptKind, system: impl Into<String>, user: impl Into<String>) -> Self {
        ChatPrompt { kind, system: system.into(), user: user.into(), temperature: DEFAULT_TEMPERATURE, model: DEFAULT_MODEL.to_string() }
    }

    pub fn token_estimate(&self) -> usize {
        estimate_tokens(&self.system) + estimate_tokens(&self.user)
    }

    fn validate(&self) -> Result<(), LlmError> {
        if self.system.trim().is_empty() || self.user.trim().is_empty() {
            return Err(LlmError::InvalidPrompt("system and user messages must be non-empty".into()));
        }
        Ok(())
    }
}

/// `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmResponse {
    pub raw_text: String,
    pub provider: String,
    pub latency_ms: u64,
}

pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &ChatPrompt) -> Result<LlmResponse, LlmError>;
}

#[derive(Serialize)]
struct AuditRecord<'a> {
    kind: PromptKind,
    model: &'a str,
    temperature: f64,
    system: &'a str,
    user: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a LlmResponse>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Shared entry point for every model call made by the pipeline.
pub struct Gateway {
    chat: Box<dyn ChatProvider>,
    embedder: Box<dyn Embedder>,
    model: String,
    temperature: f64,
    calls: Mutex<BTreeMap<PromptKind, usize>>,
    audit: Option<Mutex<BufWriter<File>>>,
}

impl Gateway {
    pub fn new(chat: Box<dyn ChatProvider>, embedder: Box<dyn Embedder>) -> Self {
        Gateway {
            chat,
            embedder,
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            calls: Mutex::new(BTreeMap::new()),
            audit: None,
        }
    }

    /// Stub chat provider with the trigram embedding fallback.
    pub fn stub(provider: StubProvider) -> Self {
        Gateway::new(Box::new(provider), Box::new(TrigramEmbedder))
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_audit_log(mut self, path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path.as_ref())
            .map_err(|e| LlmError::Config(format!("audit log {}: {e}", path.as_ref().display())))?;
        self.audit = Some(Mutex::new(BufWriter::new(file)));
        Ok(self)
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn provider_name(&self) -> &str {
        self.chat.name()
    }

    /// A prompt carrying this gateway's model and temperature.
    pub fn prompt(&self, kind: PromptKind, system: impl Into<String>, user: impl Into<String>) -> ChatPrompt {
        let mut p = ChatPrompt::new(kind, system, user);
        p.model = self.model.clone();
        p.temperature = self.temperature;
        p
    }

    /// Re-targets a prompt built with defaults to this gateway's model and temperature.
    pub fn bind(&self, mut prompt: ChatPrompt) -> ChatPrompt {
        prompt.model = self.model.clone();
        prompt.temperature = self.temperature;
        prompt
    }

    pub fn complete(&self, prompt: &ChatPrompt) -> Result<LlmResponse, LlmError> {
        prompt.validate()?;
        *self.calls.lock().expect("call counter poisoned").entry(prompt.kind).or_default() += 1;
        let result = self.chat.complete(prompt);
        self.audit(prompt, &result);
        result
    }

    /// Completes and extracts JSON; on a parse failure asks once more with
    /// [`JSON_REASK`] appended. A second failure is returned to the caller.
    pub fn complete_json(&self, prompt: &ChatPrompt) -> Result<Json, LlmError> {
        let first = self.complete(prompt)?;
        match extract_json(&first.raw_text) {
            Ok(v) => Ok(v),
            Err(_) => {
                let mut again = prompt.clone();
                again.user = format!("{}\n\n{JSON_REASK}", prompt.user);
                extract_json(&self.complete(&again)?.raw_text)
            }
        }
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>, LlmError> {
        self.embedder.embed(text)
    }

    pub fn calls(&self, kind: PromptKind) -> usize {
        self.calls.lock().expect("call counter poisoned").get(&kind).copied().unwrap_or(0)
    }

    pub fn total_calls(&self) -> usize {
        self.calls.lock().expect("call counter poisoned").values().sum()
    }

    fn audit(&self, prompt: &ChatPrompt, result: &Result<LlmResponse, LlmError>) {
        let Some(log) = &self.audit else { return };
        let record = AuditRecord {
            kind: prompt.kind,
            model: &prompt.model,
            temperature: prompt.temperature,
            system: &prompt.system,
            user: &prompt.user,
            response: result.as_ref().ok(),
            error: result.as_ref().err().map(ToString::to_string),
        };
        let mut w = log.lock().expect("audit log poisoned");
        let line = serde_json::to_string(&record).expect("audit record serializes");
        if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
            log::warn!("audit log write failed: {e}");
        }
    }
}
