//! Chat-completions client plus the model-backed classifier.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bot::Claim;
use crate::classify::{
    Classification, Classifier, ClassifierKind, ClassifyError, RuleClassifier, StructuredClassifier,
};
use crate::model::{AttributeId, Cell, Effect, Proposal};
use crate::scenario::Scenario;

pub const DEFAULT_ENDPOINT_ENV: &str = "MINDGAMES_LLM_ENDPOINT";
pub const DEFAULT_MODEL_ENV: &str = "MINDGAMES_LLM_MODEL";
pub const DEFAULT_KEY_ENV: &str = "MINDGAMES_LLM_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion: {0}")]
    Malformed(String),
}

/// Where and how to reach a chat-completions endpoint.
///
/// Only the *name* of the credential variable is stored, so a config can be
/// written into transcripts without leaking the key.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmClientConfig {
    pub endpoint: String,
    pub model: String,
    pub credential_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        LlmClientConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".to_string(),
            model: "o3".to_string(),
            credential_env: DEFAULT_KEY_ENV.to_string(),
            timeout_secs: 120,
            max_retries: 2,
        }
    }
}

impl LlmClientConfig {
    /// Defaults overridden by `MINDGAMES_LLM_ENDPOINT` / `MINDGAMES_LLM_MODEL` when set.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        if let Ok(e) = std::env::var(DEFAULT_ENDPOINT_ENV) {
            c.endpoint = e;
        }
        if let Ok(m) = std::env::var(DEFAULT_MODEL_ENV) {
            c.model = m;
        }
        c
    }
}

impl fmt::Debug for LlmClientConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmClientConfig")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("credential_env", &self.credential_env)
            .field("timeout_secs", &self.timeout_secs)
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
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

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// A completion backend. Implementations must tolerate concurrent callers.
pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;

    /// Retry budget for replies that fail validation.
    fn max_retries(&self) -> u32 {
        0
    }
}

/// Replace any occurrence of `secret` in `text`.
pub fn redact(text: &str, secret: Option<&str>) -> String {
    match secret {
        Some(s) if !s.is_empty() => text.replace(s, "[REDACTED]"),
        _ => text.to_string(),
    }
}

pub struct HttpChatClient {
    config: LlmClientConfig,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(config: LlmClientConfig) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpChatClient { config, http })
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.config
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let key = std::env::var(&self.config.credential_env).ok();
        let body = json!({ "model": self.config.model, "messages": messages });
        log::debug!("chat request to {}: {}", self.config.endpoint, body);
        let mut req = self.http.post(&self.config.endpoint).json(&body);
        if let Some(k) = &key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                LlmError::Timeout
            } else {
                LlmError::Transport(redact(&e.to_string(), key.as_deref()))
            }
        })?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| LlmError::Transport(redact(&e.to_string(), key.as_deref())))?;
        log::debug!("chat response ({status}): {}", redact(&text, key.as_deref()));
        if !status.is_success() {
            return Err(LlmError::Status {
                status: status.as_u16(),
                body: redact(&text, key.as_deref()),
            });
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LlmError::Malformed(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Malformed("missing choices[0].message.content".into()))
    }

    fn max_retries(&self) -> u32 {
        self.config.max_retries
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireClaim {
    proposal: String,
    attribute: usize,
    effect: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireClassification {
    disclosures: Vec<WireClaim>,
    info_appeals: Vec<Option<String>>,
    motivational_appeal: bool,
    #[serde(default)]
    preference_query: bool,
}

fn strip_fences(reply: &str) -> &str {
    let t = reply.trim();
    let t = t.strip_prefix("```json").or_else(|| t.strip_prefix("```")).unwrap_or(t);
    t.strip_suffix("```").unwrap_or(t).trim()
}

/// Validate a model reply against the classification schema.
pub fn parse_classification_reply(reply: &str) -> Result<Classification, String> {
    let wire: WireClassification =
        serde_json::from_str(strip_fences(reply)).map_err(|e| e.to_string())?;
    let mut out = Classification::default();
    for c in wire.disclosures {
        let proposal = Proposal::from_label(&c.proposal).map_err(|e| e.to_string())?;
        let attribute = AttributeId::new(c.attribute).map_err(|e| e.to_string())?;
        let effect = Effect::try_from(c.effect).map_err(|e| e.to_string())?;
        out.disclosures.push(Claim::new(proposal, attribute, effect));
    }
    for scope in wire.info_appeals {
        out.info_appeals.push(match scope {
            None => None,
            Some(p) => Some(Proposal::from_label(&p).map_err(|e| e.to_string())?),
        });
    }
    out.motivational_appeal = wire.motivational_appeal;
    out.preference_query = wire.preference_query;
    Ok(out.normalized())
}

/// Prompt that enumerates the nine cells and asks for a JSON classification.
pub fn classification_prompt(text: &str, scenario: &Scenario) -> Vec<ChatMessage> {
    let cells: Vec<String> = Cell::all()
        .map(|c| {
            format!(
                "- proposal {} / attribute {} ({})",
                c.proposal,
                c.attribute.index(),
                scenario.attribute_name(c.attribute)
            )
        })
        .collect();
    let system = format!(
        "You label messages sent in a negotiation game about three proposals (A, B, C) and three attributes.\n\
         The nine possible facts are:\n{}\n\
         A disclosure states that a proposal increases (+1), decreases (-1) or has no effect (0) on an attribute.\n\
         An informational appeal asks what the reader knows (optionally about one proposal).\n\
         A motivational appeal asks which attributes the reader likes, dislikes or values.\n\
         A preference query asks which proposal the reader currently chooses.\n\
         Reply with JSON only, exactly of the form:\n\
         {{\"disclosures\":[{{\"proposal\":\"A\",\"attribute\":0,\"effect\":1}}],\"info_appeals\":[null],\"motivational_appeal\":false,\"preference_query\":false}}\n\
         Use empty lists and false when nothing applies.",
        cells.join("\n")
    );
    vec![ChatMessage::system(system), ChatMessage::user(text)]
}

pub struct LlmClassifier {
    client: Arc<dyn ChatClient>,
}

impl LlmClassifier {
    pub fn new(client: Arc<dyn ChatClient>) -> Self {
        LlmClassifier { client }
    }
}

pub fn classify_llm(
    text: &str,
    scenario: &Scenario,
    client: &dyn ChatClient,
) -> Result<Classification, ClassifyError> {
    if text.trim().is_empty() {
        return Ok(Classification::generic());
    }
    let prompt = classification_prompt(text, scenario);
    let attempts = client.max_retries() + 1;
    let mut last = String::new();
    for _ in 0..attempts {
        let reply = client
            .complete(&prompt)
            .map_err(|e| ClassifyError::Transport(e.to_string()))?;
        match parse_classification_reply(&reply) {
            Ok(c) => return Ok(c),
            Err(reason) => last = reason,
        }
    }
    Err(ClassifyError::InvalidReply {
        attempts,
        reason: last,
    })
}

impl Classifier for LlmClassifier {
    fn classify(&self, text: &str, scenario: &Scenario) -> Result<Classification, ClassifyError> {
        classify_llm(text, scenario, self.client.as_ref())
    }
}

/// The classifier for `kind`. The LLM classifier needs a chat client.
pub fn build_classifier(
    kind: ClassifierKind,
    client: Option<Arc<dyn ChatClient>>,
) -> Result<Arc<dyn Classifier>, LlmError> {
    Ok(match kind {
        ClassifierKind::Structured => Arc::new(StructuredClassifier),
        ClassifierKind::Rules => Arc::new(RuleClassifier),
        ClassifierKind::Llm => Arc::new(LlmClassifier::new(client.ok_or_else(|| {
            LlmError::Transport("the llm classifier needs a configured chat client".into())
        })?)),
    })
}
