//! Prompt-completion clients used for attribute expansion.
//!
//! The contract is a single call: send a prompt, receive text. Live HTTP
//! clients, canned fixtures and record/replay logs all implement it.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    /// Network or service failure; the caller may retry.
    #[error("prompt transport error (retryable): {0}")]
    Transport(String),
    #[error("no canned response for prompt {0:?}")]
    NoResponse(String),
    #[error("prompt log i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl PromptError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, PromptError::Transport(_))
    }
}

pub trait PromptClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, PromptError>;
}

/// One prompt/response pair, kept for the refinement audit trail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub response: String,
}

/// Returns the same response for every prompt, or per-prompt responses when
/// built from a map.
#[derive(Debug, Clone, Default)]
pub struct CannedClient {
    fallback: Option<String>,
    by_prompt: HashMap<String, String>,
}

impl CannedClient {
    pub fn always(response: impl Into<String>) -> Self {
        CannedClient { fallback: Some(response.into()), by_prompt: HashMap::new() }
    }

    pub fn with(mut self, prompt: impl Into<String>, response: impl Into<String>) -> Self {
        self.by_prompt.insert(prompt.into(), response.into());
        self
    }
}

impl PromptClient for CannedClient {
    fn complete(&self, prompt: &str) -> Result<String, PromptError> {
        self.by_prompt
            .get(prompt)
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| PromptError::NoResponse(prompt.to_string()))
    }
}

/// Replays exchanges previously written by [`RecordingClient`].
#[derive(Debug, Clone)]
pub struct ReplayClient {
    responses: HashMap<String, String>,
}

impl ReplayClient {
    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path)?;
        let mut responses = HashMap::new();
        for (lineno, line) in crate::lineio::numbered_lines(&text) {
            let ex: Exchange = crate::lineio::from_line(line, lineno)
                .map_err(|e| PromptError::Io(std::io::Error::other(e)))?;
            responses.insert(ex.prompt, ex.response);
        }
        Ok(ReplayClient { responses })
    }
}

impl PromptClient for ReplayClient {
    fn complete(&self, prompt: &str) -> Result<String, PromptError> {
        self.responses
            .get(prompt)
            .cloned()
            .ok_or_else(|| PromptError::NoResponse(prompt.to_string()))
    }
}

/// Wraps another client and appends every exchange to a JSON-lines log.
pub struct RecordingClient<C> {
    inner: C,
    log: Mutex<PathBuf>,
}

impl<C: PromptClient> RecordingClient<C> {
    pub fn new(inner: C, log_path: impl Into<PathBuf>) -> Self {
        RecordingClient { inner, log: Mutex::new(log_path.into()) }
    }
}

impl<C: PromptClient> PromptClient for RecordingClient<C> {
    fn complete(&self, prompt: &str) -> Result<String, PromptError> {
        let response = self.inner.complete(prompt)?;
        let path = self.log.lock().expect("prompt log lock poisoned");
        let ex = Exchange { prompt: prompt.to_string(), response: response.clone() };
        let line = crate::lineio::to_line(&ex).map_err(|e| PromptError::Io(e.into()))?;
        let mut file = fs::OpenOptions::new().create(true).append(true).open(&*path)?;
        file.write_all(line.as_bytes())?;
        Ok(response)
    }
}

/// Chat-completions style HTTP client (OpenAI-compatible request shape).
///
/// Reads `ADC_LLM_ENDPOINT`, `ADC_LLM_KEY` and optionally `ADC_LLM_MODEL`.
pub struct HttpPromptClient {
    endpoint: String,
    key: String,
    model: String,
}

impl HttpPromptClient {
    pub fn from_env() -> Result<Self, PromptError> {
        let endpoint = std::env::var("ADC_LLM_ENDPOINT")
            .map_err(|_| PromptError::Transport("ADC_LLM_ENDPOINT not set".into()))?;
        let key = std::env::var("ADC_LLM_KEY").unwrap_or_default();
        let model = std::env::var("ADC_LLM_MODEL").unwrap_or_else(|_| "gpt-4".to_string());
        Ok(HttpPromptClient { endpoint, key, model })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl PromptClient for HttpPromptClient {
    fn complete(&self, prompt: &str) -> Result<String, PromptError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut resp = ureq::post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(&body)
            .map_err(|e| PromptError::Transport(e.to_string()))?;
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| PromptError::Transport(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| PromptError::Transport("empty completion".into()))
    }
}
