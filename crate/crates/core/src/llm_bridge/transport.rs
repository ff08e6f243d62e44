use std::collections::HashMap;
use std::io;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LlmConfig, LlmExchange};
use crate::dataset_io::{read_jsonl, ReadMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

/// Chat-completion request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("authentication failed: {0}")]
    Auth(String),
    /// Worth retrying: timeouts, connection errors, 429 and 5xx.
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("request failed: {0}")]
    Fatal(String),
    #[error("no recorded response for {0:?}")]
    Missing(String),
}

pub trait Transport: Send + Sync {
    /// `key` identifies the exchange for recording and replay; it is not sent.
    fn send(&self, key: &str, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Blocking HTTP transport with a bearer token.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    token: Option<String>,
}

impl HttpTransport {
    /// Token comes from the environment variable named in the config.
    pub fn from_env(config: &LlmConfig) -> Result<Self, TransportError> {
        Self::with_token(config, std::env::var(&config.token_env).ok())
    }

    pub fn with_token(config: &LlmConfig, token: Option<String>) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| TransportError::Fatal(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: config.endpoint.clone(),
            token,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

impl Transport for HttpTransport {
    fn send(&self, _key: &str, request: &ChatRequest) -> Result<String, TransportError> {
        let body = serde_json::to_vec(request).map_err(|e| TransportError::Fatal(e.to_string()))?;
        let mut req = self
            .client
            .post(&self.endpoint)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError::Transient(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {
                let parsed: ChatResponse =
                    serde_json::from_str(&text).map_err(|e| TransportError::Fatal(format!("bad response body: {e}")))?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| TransportError::Fatal("response has no choices".into()))
            }
            401 | 403 => Err(TransportError::Auth(format!("HTTP {status}"))),
            429 | 500..=599 => Err(TransportError::Transient(format!("HTTP {status}"))),
            _ => Err(TransportError::Fatal(format!("HTTP {status}: {text}"))),
        }
    }
}

/// Serves responses from a previous run's audit log, keyed by exchange key.
#[derive(Debug, Clone, Default)]
pub struct ReplayTransport {
    responses: HashMap<String, String>,
}

impl ReplayTransport {
    pub fn new(responses: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            responses: responses.into_iter().collect(),
        }
    }

    /// Successful exchanges win; later entries override earlier ones.
    pub fn from_exchanges(exchanges: &[LlmExchange]) -> Self {
        Self::new(
            exchanges
                .iter()
                .filter_map(|e| e.response.clone().map(|r| (e.key.clone(), r))),
        )
    }

    pub fn from_audit_log(path: &Path) -> io::Result<Self> {
        let log = read_jsonl::<LlmExchange>(path, ReadMode::Strict)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        Ok(Self::from_exchanges(&log.records))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Transport for ReplayTransport {
    fn send(&self, key: &str, _request: &ChatRequest) -> Result<String, TransportError> {
        self.responses
            .get(key)
            .cloned()
            .ok_or_else(|| TransportError::Missing(key.to_string()))
    }
}
