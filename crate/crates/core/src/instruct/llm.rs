//! Client for a hosted chat-completion service.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    /// Network failure, timeout, rate limit or server error. Retryable.
    #[error("transport: {0}")]
    Transport(String),
    /// The service refused the request. Not retried.
    #[error("rejected: {0}")]
    Rejected(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport(_))
    }
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Full URL of an OpenAI-compatible chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer credential.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "vicuna-7b-v1.5".into(),
            api_key_env: "CHANGEKIT_LLM_API_KEY".into(),
            temperature: 0.2,
            max_tokens: 512,
            timeout_secs: 120,
        }
    }
}

pub struct HttpLlmClient {
    config: LlmConfig,
    credential: String,
    http: reqwest::blocking::Client,
}

impl HttpLlmClient {
    /// Reads the credential from the configured environment variable.
    pub fn from_env(config: LlmConfig) -> Result<Self> {
        let credential = std::env::var(&config.api_key_env)
            .map_err(|_| Error::invalid(format!("credential variable {} is not set", config.api_key_env)))?;
        Self::with_credential(config, credential)
    }

    pub fn with_credential(config: LlmConfig, credential: String) -> Result<Self> {
        if config.endpoint.trim().is_empty() {
            return Err(Error::invalid("LLM endpoint is empty"));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::invalid(format!("building HTTP client: {e}")))?;
        Ok(Self {
            config,
            credential,
            http,
        })
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let response = self
            .http
            .post(&self.config.endpoint)
            .bearer_auth(&self.credential)
            .json(&body)
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(LlmError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(LlmError::Rejected(format!("HTTP {status}: {text}")));
        }
        let completion: Completion = response
            .json()
            .map_err(|e| LlmError::Transport(format!("decoding response: {e}")))?;
        completion
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::Rejected("response has no choices".into()))
    }
}
