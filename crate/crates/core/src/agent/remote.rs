//! Blocking chat-completion client with timeout and bounded retries.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::depiction::PromptBundle;

use super::cores::CoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// full URL of the chat-completions endpoint
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// initial backoff between retries; doubles on each retry
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// name of the environment variable holding the bearer token
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

fn default_backoff() -> u64 {
    500
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.0,
            timeout_s: default_timeout(),
            retries: default_retries(),
            backoff_ms: default_backoff(),
            api_key_env: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Clone, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Clone, Deserialize)]
struct ChoiceMessage {
    content: String,
}

/// Assistant text of a successful call.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    /// failed attempts before the successful one
    pub retries: u32,
    pub latency: Duration,
}

/// Request body for a bundle: the system prompt, then scene and feedback as the user turn.
pub fn chat_request(bundle: &PromptBundle, cfg: &RemoteConfig) -> ChatRequest {
    ChatRequest {
        model: cfg.model.clone(),
        messages: vec![
            ChatMessage {
                role: "system".into(),
                content: bundle.system.clone(),
            },
            ChatMessage {
                role: "user".into(),
                content: bundle.user_message(),
            },
        ],
        temperature: cfg.temperature,
    }
}

pub(crate) fn agent_for(cfg: &RemoteConfig) -> ureq::Agent {
    let timeout = Duration::from_secs_f64(cfg.timeout_s.max(0.001));
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn attempt(agent: &ureq::Agent, cfg: &RemoteConfig, body: &ChatRequest) -> Result<String, CoreError> {
    let mut req = agent.post(&cfg.endpoint);
    if let Some(var) = &cfg.api_key_env {
        let key = std::env::var(var)
            .map_err(|_| CoreError::Config(format!("environment variable `{var}` is not set")))?;
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let mut resp = req.send_json(body).map_err(|e| match e {
        ureq::Error::Timeout(_) => CoreError::Timeout,
        other => CoreError::Transport(other.to_string()),
    })?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(CoreError::Http(status));
    }
    let parsed: ChatResponse = resp.body_mut().read_json().map_err(|e| match e {
        ureq::Error::Timeout(_) => CoreError::Timeout,
        other => CoreError::BadResponse(other.to_string()),
    })?;
    parsed
        .choices
        .into_iter()
        .next()
        .map(|c| c.message.content)
        .ok_or_else(|| CoreError::BadResponse("no choices".into()))
}

fn retryable(e: &CoreError) -> bool {
    match e {
        CoreError::Timeout | CoreError::Transport(_) => true,
        CoreError::Http(s) => matches!(s, 408 | 429 | 500 | 502 | 503 | 504),
        _ => false,
    }
}

/// Sends one chat-completion request, retrying transient failures with
/// exponential backoff.
pub fn llm_complete(bundle: &PromptBundle, cfg: &RemoteConfig) -> Result<Completion, CoreError> {
    complete_with(&agent_for(cfg), bundle, cfg)
}

pub(crate) fn complete_with(
    agent: &ureq::Agent,
    bundle: &PromptBundle,
    cfg: &RemoteConfig,
) -> Result<Completion, CoreError> {
    let body = chat_request(bundle, cfg);
    let start = Instant::now();
    let mut backoff = Duration::from_millis(cfg.backoff_ms);
    let mut retries = 0;
    loop {
        match attempt(agent, cfg, &body) {
            Ok(text) => {
                return Ok(Completion {
                    text,
                    retries,
                    latency: start.elapsed(),
                })
            }
            Err(e) if retryable(&e) && retries < cfg.retries => {
                retries += 1;
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            Err(e) => return Err(e),
        }
    }
}
