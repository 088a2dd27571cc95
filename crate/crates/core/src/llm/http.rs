use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError, Role, ToolCall, Usage};

pub const API_KEY_VAR: &str = "LLM_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Clone, Debug)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: String,
    pub timeout: Duration,
}

impl HttpConfig {
    /// Reads the key from `LLM_API_KEY`.
    pub fn from_env(endpoint: Option<&str>) -> Result<Self, LlmError> {
        let api_key = std::env::var(API_KEY_VAR).map_err(|_| {
            LlmError::Transport(format!("environment variable {API_KEY_VAR} is not set"))
        })?;
        Ok(Self {
            endpoint: endpoint.unwrap_or(DEFAULT_ENDPOINT).to_string(),
            api_key,
            timeout: Duration::from_secs(120),
        })
    }
}

/// Chat-completions provider over HTTPS.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .new_agent();
        Self { config, agent }
    }
}

fn role_str(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
        Role::Tool => "tool",
    }
}

pub(crate) fn wire_request(request: &ChatRequest) -> Value {
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| {
            let mut msg = json!({"role": role_str(m.role), "content": m.content});
            if let Some(call) = &m.tool_call {
                msg["content"] = Value::Null;
                msg["tool_calls"] = json!([{
                    "id": call.id,
                    "type": "function",
                    "function": {"name": call.name, "arguments": call.arguments.to_string()},
                }]);
            }
            if let Some(id) = &m.tool_call_id {
                msg["tool_call_id"] = json!(id);
            }
            msg
        })
        .collect();
    let mut body = json!({
        "model": request.model,
        "temperature": request.temperature,
        "messages": messages,
    });
    if !request.tools.is_empty() {
        body["tools"] = Value::Array(request.tools.iter().map(|t| t.to_tool_schema()).collect());
    }
    body
}

pub(crate) fn parse_wire_response(body: &Value) -> Result<ChatResponse, LlmError> {
    let bad = |what: &str| LlmError::BadResponse(what.to_string());
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| bad("missing choices[0].message"))?;
    let usage = body.get("usage").map(|u| Usage {
        prompt_tokens: u["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: u["completion_tokens"].as_u64().unwrap_or(0),
    });
    if let Some(call) = message.pointer("/tool_calls/0") {
        let name = call
            .pointer("/function/name")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("tool call without name"))?;
        let raw = call
            .pointer("/function/arguments")
            .and_then(Value::as_str)
            .unwrap_or("{}");
        let arguments = serde_json::from_str(raw)
            .map_err(|e| bad(&format!("tool arguments are not JSON: {e}")))?;
        return Ok(ChatResponse::ToolCall {
            call: ToolCall {
                id: call["id"].as_str().unwrap_or("call").to_string(),
                name: name.to_string(),
                arguments,
            },
            usage,
        });
    }
    let text = message["content"]
        .as_str()
        .ok_or_else(|| bad("message has neither content nor tool call"))?;
    Ok(ChatResponse::Text {
        text: text.to_string(),
        usage,
    })
}

impl ChatBackend for HttpBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let body = wire_request(request).to_string();
        let result = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .header("Content-Type", "application/json")
            .send(body.as_str());
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(429)) => return Err(LlmError::RateLimited { attempts: 1 }),
            Err(e) => return Err(LlmError::Transport(e.to_string())),
        };
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| LlmError::BadResponse(e.to_string()))?;
        parse_wire_response(&value)
    }
}
