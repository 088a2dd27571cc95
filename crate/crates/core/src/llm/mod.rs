//! Chat-completion gateway with tool calling, per-agent call accounting and
//! deterministic scripted and replay backends.

#[cfg(feature = "http")]
mod http;
mod script;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dom::collapse_whitespace;
use crate::skills::SkillDescriptor;

#[cfg(feature = "http")]
pub use http::{HttpBackend, HttpConfig, API_KEY_VAR, DEFAULT_ENDPOINT};
pub use script::{
    load_script, parse_script, FnBackend, RecordingBackend, ReplayBackend, ScriptEntry,
    ScriptOutcome, ScriptedBackend, ScriptedError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentLabel {
    Planner,
    Navigator,
}

impl fmt::Display for AgentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentLabel::Planner => "planner",
            AgentLabel::Navigator => "navigator",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call: Option<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            tool_call: None,
            tool_call_id: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn assistant_tool_call(call: ToolCall) -> Self {
        Self {
            tool_call: Some(call),
            ..Self::plain(Role::Assistant, "")
        }
    }

    pub fn tool(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            tool_call_id: Some(call_id.into()),
            ..Self::plain(Role::Tool, content)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub agent: AgentLabel,
    pub model: String,
    pub temperature: f32,
    pub messages: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tools: Vec<SkillDescriptor>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChatResponse {
    Text {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        usage: Option<Usage>,
    },
    ToolCall {
        #[serde(flatten)]
        call: ToolCall,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        usage: Option<Usage>,
    },
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        ChatResponse::Text {
            text: text.into(),
            usage: None,
        }
    }

    pub fn tool_call(id: impl Into<String>, name: impl Into<String>, arguments: Value) -> Self {
        ChatResponse::ToolCall {
            call: ToolCall {
                id: id.into(),
                name: name.into(),
                arguments,
            },
            usage: None,
        }
    }

    pub fn usage(&self) -> Option<Usage> {
        match self {
            ChatResponse::Text { usage, .. } | ChatResponse::ToolCall { usage, .. } => *usage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("replay diverged at call {ordinal}: recorded request {expected}, got {actual}")]
    ReplayDivergence {
        ordinal: u64,
        expected: String,
        actual: String,
    },
    #[error("script exhausted: no entry for call {ordinal}")]
    ScriptExhausted { ordinal: u64 },
    #[error("script line {line}: {reason}")]
    ScriptFormat { line: usize, reason: String },
    #[error("provider returned an unusable response: {0}")]
    BadResponse(String),
}

/// A chat-completion provider.
pub trait ChatBackend: Send {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

/// Successful calls per agent, plus retried attempts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallLedger {
    pub total: u64,
    pub planner: u64,
    pub navigator: u64,
    pub retries: u64,
}

impl CallLedger {
    fn record(&mut self, agent: AgentLabel) {
        self.total += 1;
        match agent {
            AgentLabel::Planner => self.planner += 1,
            AgentLabel::Navigator => self.navigator += 1,
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.total == self.planner + self.navigator
    }
}

#[derive(Serialize)]
struct CanonicalMessage<'a> {
    role: Role,
    content: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tool: Option<(&'a str, String)>,
}

/// Stable hash of the logical content of a request: agent, roles, contents
/// with whitespace collapsed, tool calls and offered tool names. Model,
/// temperature and call ids are excluded.
pub fn request_hash(request: &ChatRequest) -> String {
    let messages: Vec<CanonicalMessage> = request
        .messages
        .iter()
        .map(|m| CanonicalMessage {
            role: m.role,
            content: collapse_whitespace(&m.content),
            tool: m
                .tool_call
                .as_ref()
                .map(|c| (c.name.as_str(), canonical_json(&c.arguments))),
        })
        .collect();
    let tools: Vec<&str> = request.tools.iter().map(|t| t.name.as_str()).collect();
    let doc = serde_json::json!({
        "agent": request.agent,
        "messages": messages,
        "tools": tools,
    });
    hex::encode(Sha256::digest(canonical_json(&doc).as_bytes()))
}

/// JSON with object keys sorted at every level.
pub fn canonical_json(value: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                Value::Object(
                    keys.into_iter()
                        .map(|k| (k.clone(), sorted(&map[k])))
                        .collect(),
                )
            }
            Value::Array(items) => Value::Array(items.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    sorted(value).to_string()
}

pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_BACKOFF: Duration = Duration::from_millis(500);

pub type Sleeper = Box<dyn FnMut(Duration) + Send>;

/// One per task. Retries rate-limited calls with exponential backoff and
/// counts every successful call against the requesting agent.
pub struct LlmGateway {
    backend: Box<dyn ChatBackend>,
    ledger: CallLedger,
    max_retries: u32,
    backoff: Duration,
    sleeper: Sleeper,
    ordinal: u64,
}

impl LlmGateway {
    pub fn new(backend: impl ChatBackend + 'static) -> Self {
        Self {
            backend: Box::new(backend),
            ledger: CallLedger::default(),
            max_retries: DEFAULT_MAX_RETRIES,
            backoff: DEFAULT_BACKOFF,
            sleeper: Box::new(std::thread::sleep),
            ordinal: 0,
        }
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    pub fn with_sleeper(mut self, sleeper: impl FnMut(Duration) + Send + 'static) -> Self {
        self.sleeper = Box::new(sleeper);
        self
    }

    pub fn ledger(&self) -> CallLedger {
        self.ledger
    }

    /// Ordinal of the last completed call, 1-based.
    pub fn ordinal(&self) -> u64 {
        self.ordinal
    }

    pub fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.backend.complete(request) {
                Ok(resp) => {
                    self.ledger.record(request.agent);
                    self.ordinal += 1;
                    return Ok(resp);
                }
                Err(LlmError::RateLimited { .. }) if attempt <= self.max_retries => {
                    self.ledger.retries += 1;
                    let delay = self.backoff.saturating_mul(1 << (attempt - 1).min(16));
                    log::debug!("rate limited, retry {attempt} after {delay:?}");
                    (self.sleeper)(delay);
                }
                Err(LlmError::RateLimited { .. }) => {
                    return Err(LlmError::RateLimited { attempts: attempt })
                }
                Err(e) => return Err(e),
            }
        }
    }
}

impl fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmGateway")
            .field("ledger", &self.ledger)
            .field("max_retries", &self.max_retries)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};

    fn req(agent: AgentLabel, text: &str) -> ChatRequest {
        ChatRequest {
            agent,
            model: "m".into(),
            temperature: 0.0,
            messages: vec![ChatMessage::system("sys"), ChatMessage::user(text)],
            tools: vec![],
        }
    }

    #[test]
    fn hash_ignores_model_ids_and_whitespace() {
        let a = req(AgentLabel::Planner, "find  the\nprice");
        let mut b = req(AgentLabel::Planner, "find the price");
        b.model = "other".into();
        b.temperature = 0.7;
        assert_eq!(request_hash(&a), request_hash(&b));
        assert_ne!(
            request_hash(&a),
            request_hash(&req(AgentLabel::Navigator, "find the price"))
        );
        assert_ne!(
            request_hash(&a),
            request_hash(&req(AgentLabel::Planner, "find a price"))
        );
    }

    #[test]
    fn hash_is_pinned() {
        // Guards against accidental changes to the canonical form.
        let h = request_hash(&req(AgentLabel::Planner, "hello"));
        let doc = r#"{"agent":"planner","messages":[{"content":"sys","role":"system"},{"content":"hello","role":"user"}],"tools":[]}"#;
        assert_eq!(h, hex::encode(Sha256::digest(doc.as_bytes())));
    }

    #[test]
    fn canonical_json_sorts_nested_keys() {
        let v = serde_json::json!({"b": {"z": 1, "a": [{"y": 2, "x": 3}]}, "a": null});
        assert_eq!(
            canonical_json(&v),
            r#"{"a":null,"b":{"a":[{"x":3,"y":2}],"z":1}}"#
        );
    }

    struct Flaky {
        fail_first: u32,
        calls: u32,
    }

    impl ChatBackend for Flaky {
        fn complete(&mut self, _: &ChatRequest) -> Result<ChatResponse, LlmError> {
            self.calls += 1;
            if self.calls <= self.fail_first {
                Err(LlmError::RateLimited { attempts: 1 })
            } else {
                Ok(ChatResponse::text("ok"))
            }
        }
    }

    #[test]
    fn retries_back_off_and_count_once() {
        let slept = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&slept);
        let mut gw = LlmGateway::new(Flaky {
            fail_first: 2,
            calls: 0,
        })
        .with_sleeper(move |d| log.lock().unwrap().push(d.as_millis()));
        assert_eq!(
            gw.complete(&req(AgentLabel::Navigator, "x")).unwrap(),
            ChatResponse::text("ok")
        );
        let l = gw.ledger();
        assert_eq!((l.total, l.planner, l.navigator, l.retries), (1, 0, 1, 2));
        assert_eq!(*slept.lock().unwrap(), [500, 1000]);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let mut gw = LlmGateway::new(Flaky {
            fail_first: 10,
            calls: 0,
        })
        .with_sleeper(|_| {});
        assert_eq!(
            gw.complete(&req(AgentLabel::Planner, "x")),
            Err(LlmError::RateLimited { attempts: 4 })
        );
        assert_eq!(gw.ledger().total, 0);
        assert_eq!(gw.ledger().retries, 3);
    }

    #[test]
    fn response_json_shape() {
        let r = ChatResponse::tool_call("c1", "click", serde_json::json!({"mmid": 3}));
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"kind": "tool_call", "id": "c1", "name": "click", "arguments": {"mmid": 3}})
        );
        assert_eq!(serde_json::from_value::<ChatResponse>(v).unwrap(), r);
    }
}
