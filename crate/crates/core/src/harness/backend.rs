//! Model backends: built-in mocks and a chat-completion HTTP adapter.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::extraction::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Message {
            role,
            content: content.into(),
        }
    }
}

/// Everything that determines a completion. Field order is the canonical
/// serialization order used for cache fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    /// Text of the final user message.
    pub fn input(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion {
            text: text.into(),
            usage: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub context_length: Option<usize>,
    pub system_messages: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Worth retrying: rate limits, 5xx, timeouts, dropped connections.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

pub trait ModelBackend: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    /// True when identical requests always produce identical completions.
    fn is_deterministic(&self) -> bool;

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError>;
}

const MOCK_CAPABILITIES: Capabilities = Capabilities {
    context_length: None,
    system_messages: true,
};

/// Returns the input unchanged.
#[derive(Debug, Default, Clone)]
pub struct EchoBackend;

impl ModelBackend for EchoBackend {
    fn name(&self) -> &str {
        "mock-echo"
    }

    fn capabilities(&self) -> Capabilities {
        MOCK_CAPABILITIES
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        Ok(Completion::text(request.input()))
    }
}

/// Returns an empty transcript.
#[derive(Debug, Default, Clone)]
pub struct EmptyBackend;

impl ModelBackend for EmptyBackend {
    fn name(&self) -> &str {
        "mock-empty"
    }

    fn capabilities(&self) -> Capabilities {
        MOCK_CAPABILITIES
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn complete(&self, _request: &CompletionRequest) -> Result<Completion, BackendError> {
        Ok(Completion::text(""))
    }
}

/// Answers each input line with the gold fluent text of the utterance whose
/// disfluent text it is.
///
/// Lines are looked up by exact disfluent text; if two utterances share a
/// disfluent text, the first one in corpus order supplies the answer.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    gold: HashMap<String, String>,
}

impl OracleBackend {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut gold = HashMap::with_capacity(corpus.len());
        for utt in &corpus.utterances {
            gold.entry(utt.disfluent_text()).or_insert_with(|| utt.fluent_text());
        }
        OracleBackend { gold }
    }
}

impl ModelBackend for OracleBackend {
    fn name(&self) -> &str {
        "mock-oracle"
    }

    fn capabilities(&self) -> Capabilities {
        MOCK_CAPABILITIES
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        let lines = request
            .input()
            .lines()
            .map(|line| {
                self.gold
                    .get(line)
                    .map(String::as_str)
                    .ok_or_else(|| BackendError::Fatal(format!("oracle has no gold for line {line:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Completion::text(lines.join("\n")))
    }
}

/// Names accepted by [`mock_backend`].
pub const MOCK_MODELS: [&str; 3] = ["mock-echo", "mock-oracle", "mock-empty"];

pub fn mock_backend(name: &str, corpus: &Corpus) -> Option<Box<dyn ModelBackend>> {
    match name {
        "mock-echo" => Some(Box::new(EchoBackend)),
        "mock-empty" => Some(Box::new(EmptyBackend)),
        "mock-oracle" => Some(Box::new(OracleBackend::from_corpus(corpus))),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    /// Environment variable holding the bearer token. Unset or empty means
    /// no Authorization header.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub capabilities: Capabilities,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "http://localhost:8000/v1".into(),
            api_key_env: "DRES_API_KEY".into(),
            timeout_secs: 120,
            capabilities: Capabilities {
                context_length: None,
                system_messages: true,
            },
        }
    }
}

/// Chat-completion-style JSON over HTTP: POST a message list, read the first
/// choice's text.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    capabilities: Capabilities,
}

impl HttpBackend {
    pub fn new(config: &HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        HttpBackend {
            agent,
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key,
            capabilities: config.capabilities,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

fn classify_transport(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound | ureq::Error::Io(_) => {
            BackendError::Transient(err.to_string())
        }
        other => BackendError::Fatal(other.to_string()),
    }
}

/// First choice's text from a chat-completion (or legacy completion) body.
pub fn parse_completion_body(body: &Value) -> Result<Completion, BackendError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Fatal("response has no choices".into()))?;
    let text = choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Fatal("first choice has no text content".into()))?;
    let usage = body.get("usage").map(|u| Usage {
        prompt_tokens: u.get("prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        completion_tokens: u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0),
    });
    Ok(Completion {
        text: text.to_string(),
        usage,
    })
}

impl ModelBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.url
    }

    fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call.send_json(request).map_err(classify_transport)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(classify_transport)?;
        if status == 429 || (500..600).contains(&status) {
            return Err(BackendError::Transient(format!("HTTP {status}: {}", snippet(&body))));
        }
        if !(200..300).contains(&status) {
            return Err(BackendError::Fatal(format!("HTTP {status}: {}", snippet(&body))));
        }
        let json: Value =
            serde_json::from_str(&body).map_err(|e| BackendError::Fatal(format!("response is not JSON: {e}")))?;
        parse_completion_body(&json)
    }
}

fn snippet(body: &str) -> &str {
    match body.char_indices().nth(200) {
        Some((i, _)) => &body[..i],
        None => body,
    }
}
