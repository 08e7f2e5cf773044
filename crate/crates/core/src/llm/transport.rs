use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Chat-completion request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChatMessage,
}

/// Extract `choices[0].message.content` from a response body.
pub fn parse_response(body: &str) -> std::result::Result<String, TransportError> {
    let resp: ChatResponse =
        serde_json::from_str(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
    resp.choices
        .into_iter()
        .next()
        .map(|c| c.message.content)
        .ok_or_else(|| TransportError::Malformed("response has no choices".into()))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("reply rejected: {0}")]
    Rejected(String),
    #[error("{0}")]
    Injected(String),
}

/// Something that can answer a chat-completion request.
///
/// `sample` is the index of this request among identical requests issued
/// during one corpus run (0 for the first). It is not part of the wire
/// request; mocks use it to produce distinct, reproducible replies.
pub trait ChatTransport: Send + Sync {
    fn complete(
        &self,
        request: &ChatRequest,
        sample: u32,
    ) -> std::result::Result<String, TransportError>;
}

impl<T: ChatTransport + ?Sized> ChatTransport for Arc<T> {
    fn complete(
        &self,
        request: &ChatRequest,
        sample: u32,
    ) -> std::result::Result<String, TransportError> {
        (**self).complete(request, sample)
    }
}

/// Blocking HTTP(S) client for chat-completion endpoints.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
}

impl HttpTransport {
    /// Fails fast on a malformed endpoint or missing credential.
    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Result<Self> {
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
            return Err(Error::Config(format!(
                "endpoint `{endpoint}` must be an http:// or https:// URL"
            )));
        }
        if endpoint.parse::<ureq::http::Uri>().is_err() {
            return Err(Error::Config(format!(
                "endpoint `{endpoint}` is not a valid URL"
            )));
        }
        let api_key = api_key.filter(|k| !k.trim().is_empty()).ok_or_else(|| {
            Error::Config(format!(
                "missing API credential (set {})",
                super::API_KEY_ENV
            ))
        })?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpTransport {
            agent,
            endpoint: endpoint.to_string(),
            api_key,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(
        &self,
        request: &ChatRequest,
        _sample: u32,
    ) -> std::result::Result<String, TransportError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", format!("Bearer {}", self.api_key))
            .send_json(request)
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body });
        }
        parse_response(&body)
    }
}

#[derive(Debug, Clone)]
pub enum MockReply {
    /// Return the user text unchanged.
    Echo,
    /// Deterministic rule-based rewrite, varied by sample index.
    Paraphrase,
    /// Append ` #<sample + 1>` to the user text.
    AppendCounter,
    /// Every request fails.
    Fail,
}

/// In-process transport for tests and hermetic runs.
///
/// Fixture replies (keyed by exact user text) take precedence over the
/// fallback behaviour; with several fixture replies for one text, sample `i`
/// receives reply `i % n`.
pub struct MockTransport {
    fixtures: HashMap<String, Vec<String>>,
    fallback: MockReply,
    fail_after: Option<usize>,
    calls: AtomicUsize,
}

impl MockTransport {
    pub fn new(fallback: MockReply) -> Self {
        MockTransport {
            fixtures: HashMap::new(),
            fallback,
            fail_after: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn paraphrasing() -> Self {
        Self::new(MockReply::Paraphrase)
    }

    pub fn failing() -> Self {
        Self::new(MockReply::Fail)
    }

    pub fn with_fixture(mut self, original: impl Into<String>, reply: impl Into<String>) -> Self {
        self.fixtures
            .entry(original.into())
            .or_default()
            .push(reply.into());
        self
    }

    /// Succeed for the first `n` calls, then fail every call.
    pub fn fail_after(mut self, n: usize) -> Self {
        self.fail_after = Some(n);
        self
    }

    /// Load `original<TAB>reply` lines.
    pub fn with_fixture_tsv(mut self, text: &str) -> Result<Self> {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (orig, reply) = line.split_once('\t').ok_or_else(|| {
                Error::Invalid(format!("mock fixture line {}: expected a tab", i + 1))
            })?;
            self = self.with_fixture(orig, reply);
        }
        Ok(self)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatTransport for MockTransport {
    fn complete(
        &self,
        request: &ChatRequest,
        sample: u32,
    ) -> std::result::Result<String, TransportError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if self.fail_after.is_some_and(|limit| n >= limit) {
            return Err(TransportError::Injected(format!(
                "mock failure on call {}",
                n + 1
            )));
        }
        let text = request.user_text();
        if let Some(replies) = self.fixtures.get(text) {
            return Ok(replies[sample as usize % replies.len()].clone());
        }
        match self.fallback {
            MockReply::Echo => Ok(text.to_string()),
            MockReply::Paraphrase => Ok(super::paraphrase::paraphrase(text, sample)),
            MockReply::AppendCounter => Ok(format!("{text} #{}", sample + 1)),
            MockReply::Fail => Err(TransportError::Injected(
                "mock transport always fails".into(),
            )),
        }
    }
}
