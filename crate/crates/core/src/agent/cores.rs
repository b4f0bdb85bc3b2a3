//! Decision cores: the deterministic rule core, the remote LLM core and a
//! scripted core for tests and replays.

use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

use crate::depiction::PromptBundle;

use super::grammar::format_final_answer;
use super::remote::{agent_for, complete_with, RemoteConfig};
use super::DecisionContext;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoreError {
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Http(u16),
    #[error("malformed response body: {0}")]
    BadResponse(String),
    #[error("core misconfigured: {0}")]
    Config(String),
}

/// Text produced by a core for one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreReply {
    pub text: String,
    pub retries: u32,
    /// wall-clock time spent in the core
    pub latency: Duration,
}

impl CoreReply {
    pub fn immediate(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            retries: 0,
            latency: Duration::ZERO,
        }
    }
}

/// Produces response text for a prompt.
///
/// `ctx` carries the structured scene; cores backed by a language model use
/// only `bundle`.
pub trait DecisionCore: Send + Sync {
    fn name(&self) -> &str;
    fn respond(&self, bundle: &PromptBundle, ctx: &DecisionContext) -> Result<CoreReply, CoreError>;
}

/// Answers every prompt with the rule-based decision in one step.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleCore;

impl RuleCore {
    pub fn response(ctx: &DecisionContext) -> String {
        let d = ctx.rule_proposal();
        format!(
            "Thought: {}\n{}",
            d.rationale.replace('\n', " "),
            format_final_answer(&d)
        )
    }
}

impl DecisionCore for RuleCore {
    fn name(&self) -> &str {
        "rule"
    }

    fn respond(&self, _bundle: &PromptBundle, ctx: &DecisionContext) -> Result<CoreReply, CoreError> {
        Ok(CoreReply::immediate(Self::response(ctx)))
    }
}

/// One canned reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedReply {
    Text(String),
    TransportFailure,
}

/// Replays canned replies in order; optionally cycles.
#[derive(Debug)]
pub struct ScriptedCore {
    replies: Vec<ScriptedReply>,
    cycle: bool,
    cursor: Mutex<usize>,
}

impl ScriptedCore {
    pub fn new(replies: Vec<ScriptedReply>) -> Self {
        Self {
            replies,
            cycle: false,
            cursor: Mutex::new(0),
        }
    }

    pub fn cycling(replies: Vec<ScriptedReply>) -> Self {
        Self {
            cycle: true,
            ..Self::new(replies)
        }
    }

    pub fn texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(texts.into_iter().map(|t| ScriptedReply::Text(t.into())).collect())
    }

    /// Loads a JSON array; strings are replies, `null` is a transport failure.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let items: Vec<Option<String>> =
            serde_json::from_str(text).map_err(|e| format!("scripted core file: {e}"))?;
        Ok(Self::new(
            items
                .into_iter()
                .map(|i| i.map_or(ScriptedReply::TransportFailure, ScriptedReply::Text))
                .collect(),
        ))
    }

    pub fn remaining(&self) -> usize {
        let c = *self.cursor.lock().expect("cursor lock");
        self.replies.len().saturating_sub(c)
    }
}

impl DecisionCore for ScriptedCore {
    fn name(&self) -> &str {
        "scripted"
    }

    fn respond(&self, _bundle: &PromptBundle, _ctx: &DecisionContext) -> Result<CoreReply, CoreError> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        if self.replies.is_empty() {
            return Ok(CoreReply::immediate(""));
        }
        let idx = if self.cycle {
            *cursor % self.replies.len()
        } else {
            *cursor
        };
        *cursor += 1;
        // an exhausted script is silent
        match self.replies.get(idx) {
            Some(ScriptedReply::Text(t)) => Ok(CoreReply::immediate(t.clone())),
            Some(ScriptedReply::TransportFailure) => {
                Err(CoreError::Transport("scripted transport failure".into()))
            }
            None => Ok(CoreReply::immediate("")),
        }
    }
}

/// Language model behind a chat-completion endpoint.
pub struct RemoteLlmCore {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteLlmCore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteLlmCore")
            .field("config", &self.config)
            .finish()
    }
}

impl RemoteLlmCore {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = agent_for(&config);
        Self { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }
}

impl DecisionCore for RemoteLlmCore {
    fn name(&self) -> &str {
        "remote"
    }

    fn respond(&self, bundle: &PromptBundle, _ctx: &DecisionContext) -> Result<CoreReply, CoreError> {
        let c = complete_with(&self.agent, bundle, &self.config)?;
        Ok(CoreReply {
            text: c.text,
            retries: c.retries,
            latency: c.latency,
        })
    }
}
