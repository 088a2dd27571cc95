use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AgentConfig, NavReport, PlannerState, Runtime};
use crate::llm::{AgentLabel, ChatMessage, ChatRequest, ChatResponse, LlmError};
use crate::trace::TraceEvent;

pub const TERMINATE_SENTINEL: &str = "##TERMINATE TASK##";

const REPROMPT: &str = "Your reply did not follow the required format. Respond again with a PLAN: line followed by exactly one of: a NEXT: line with the next sub-task, a VERIFY: line with a question, or ##TERMINATE TASK## followed by the final answer.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectiveKind {
    Delegate,
    Verify,
    Terminate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerDirective {
    pub kind: DirectiveKind,
    /// The sub-task or question; empty for Terminate.
    pub subtask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    pub plan_note: String,
}

impl PlannerDirective {
    pub fn delegate(subtask: impl Into<String>) -> Self {
        Self {
            kind: DirectiveKind::Delegate,
            subtask: subtask.into(),
            final_answer: None,
            plan_note: String::new(),
        }
    }

    /// Canonical text form, as it appears in the planner history.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.plan_note.is_empty() {
            out.push_str("PLAN: ");
            out.push_str(&self.plan_note);
            out.push('\n');
        }
        match self.kind {
            DirectiveKind::Delegate => out.push_str(&format!("NEXT: {}", self.subtask)),
            DirectiveKind::Verify => out.push_str(&format!("VERIFY: {}", self.subtask)),
            DirectiveKind::Terminate => {
                out.push_str(TERMINATE_SENTINEL);
                out.push('\n');
                out.push_str(self.final_answer.as_deref().unwrap_or_default());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DirectiveParseError {
    #[error("no NEXT:, VERIFY: or {TERMINATE_SENTINEL} in planner reply")]
    MissingDirective,
    #[error("{field} is empty")]
    EmptyField { field: &'static str },
    #[error("planner replied with a tool call")]
    UnexpectedToolCall,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Field {
    Plan,
    Next,
    Verify,
}

fn field_start(line: &str) -> Option<(Field, &str)> {
    let t = line.trim_start();
    let (head, rest) = t.split_once(':')?;
    let field = match head.trim().to_ascii_uppercase().as_str() {
        "PLAN" => Field::Plan,
        "NEXT" => Field::Next,
        "VERIFY" => Field::Verify,
        _ => return None,
    };
    Some((field, rest.trim()))
}

/// Parses a planner reply. Field names are case-insensitive and values may
/// continue on following lines.
pub fn parse_directive(text: &str) -> Result<PlannerDirective, DirectiveParseError> {
    let (before, after) = match text.find(TERMINATE_SENTINEL) {
        Some(i) => (&text[..i], Some(&text[i + TERMINATE_SENTINEL.len()..])),
        None => (text, None),
    };
    let mut fields: Vec<(Field, String)> = Vec::new();
    let mut loose = String::new();
    for line in before.lines() {
        match field_start(line) {
            Some((f, rest)) => fields.push((f, rest.to_string())),
            None => match fields.last_mut() {
                Some((_, value)) => {
                    if !line.trim().is_empty() {
                        if !value.is_empty() {
                            value.push('\n');
                        }
                        value.push_str(line.trim());
                    }
                }
                None => {
                    loose.push_str(line);
                    loose.push('\n');
                }
            },
        }
    }
    let get = |want: Field| {
        fields
            .iter()
            .find(|(f, _)| *f == want)
            .map(|(_, v)| v.trim().to_string())
    };
    let plan_note = get(Field::Plan).unwrap_or_default();

    if let Some(after) = after {
        let mut answer = after.trim().to_string();
        if answer.is_empty() {
            answer = loose.trim().to_string();
        }
        if answer.is_empty() {
            return Err(DirectiveParseError::EmptyField {
                field: "final answer",
            });
        }
        return Ok(PlannerDirective {
            kind: DirectiveKind::Terminate,
            subtask: String::new(),
            final_answer: Some(answer),
            plan_note,
        });
    }
    let (kind, subtask, name) = match fields
        .iter()
        .find(|(f, _)| matches!(f, Field::Next | Field::Verify))
    {
        Some((Field::Next, v)) => (DirectiveKind::Delegate, v.trim().to_string(), "NEXT"),
        Some((_, v)) => (DirectiveKind::Verify, v.trim().to_string(), "VERIFY"),
        None => return Err(DirectiveParseError::MissingDirective),
    };
    if subtask.is_empty() {
        return Err(DirectiveParseError::EmptyField { field: name });
    }
    Ok(PlannerDirective {
        kind,
        subtask,
        final_answer: None,
        plan_note,
    })
}

fn report_message(report: &NavReport) -> String {
    let status = if report.success {
        "completed"
    } else {
        "failed"
    };
    format!(
        "Navigation agent report ({status}, {} turns): {}\nCurrent URL: {}",
        report.turns_used, report.summary, report.last_url
    )
}

/// Planner conversation rebuilt from task and history. Carries only
/// directives, navigator summaries and URLs.
pub fn planner_messages(state: &PlannerState, config: &AgentConfig) -> Vec<ChatMessage> {
    let mut messages = vec![
        ChatMessage::system(config.planner_prompt.clone()),
        ChatMessage::user(format!(
            "Task: {}\nCurrent URL: {}",
            state.task, state.start_url
        )),
    ];
    for (directive, report) in &state.history {
        messages.push(ChatMessage::assistant(directive.render()));
        messages.push(ChatMessage::user(report_message(report)));
    }
    messages
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("planner step budget of {0} exhausted")]
    StepBudgetExhausted(usize),
    #[error("planner reply unusable after a reprompt: {0}")]
    DirectiveParse(DirectiveParseError),
    #[error(transparent)]
    Gateway(#[from] LlmError),
}

/// One planner decision. A malformed reply is answered with one reprompt.
pub fn plan_next(
    state: &PlannerState,
    rt: &mut Runtime<'_>,
    config: &AgentConfig,
) -> Result<PlannerDirective, PlanError> {
    if state.steps_used >= config.max_planner_steps {
        return Err(PlanError::StepBudgetExhausted(config.max_planner_steps));
    }
    let step = state.steps_used + 1;
    let mut messages = planner_messages(state, config);
    let mut last_error = DirectiveParseError::MissingDirective;
    for _attempt in 0..2 {
        let request = ChatRequest {
            agent: AgentLabel::Planner,
            model: config.planner_model.clone(),
            temperature: config.temperature,
            messages: messages.clone(),
            tools: Vec::new(),
        };
        let response = rt.gateway.complete(&request);
        rt.trace.push(TraceEvent::PlannerRequest {
            step,
            ordinal: rt.gateway.ordinal() + u64::from(response.is_err()),
            request,
        });
        let response = response.inspect_err(|e| {
            rt.trace.push(TraceEvent::GatewayError {
                agent: AgentLabel::Planner,
                error: e.to_string(),
            })
        })?;
        let raw = match response {
            ChatResponse::Text { text, .. } => text,
            ChatResponse::ToolCall { .. } => {
                last_error = DirectiveParseError::UnexpectedToolCall;
                messages.push(ChatMessage::assistant(""));
                messages.push(ChatMessage::user(REPROMPT));
                continue;
            }
        };
        match parse_directive(&raw) {
            Ok(directive) => {
                rt.trace.push(TraceEvent::PlannerDirective {
                    step,
                    raw,
                    directive: directive.clone(),
                });
                return Ok(directive);
            }
            Err(e) => {
                log::debug!("planner reply unparsable: {e}");
                last_error = e;
                messages.push(ChatMessage::assistant(raw));
                messages.push(ChatMessage::user(REPROMPT));
            }
        }
    }
    Err(PlanError::DirectiveParse(last_error))
}
