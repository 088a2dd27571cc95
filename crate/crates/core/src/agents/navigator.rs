use serde::{Deserialize, Serialize};

use super::{AgentConfig, PlannerDirective, Runtime};
use crate::harness::FailurePatterns;
use crate::llm::{AgentLabel, ChatMessage, ChatRequest, ChatResponse, LlmError};
use crate::trace::TraceEvent;

pub const SUBTASK_DONE_SENTINEL: &str = "##SUBTASK DONE##";

const NUDGE: &str = "If the sub-task is finished, reply with a short summary followed by ##SUBTASK DONE##. Otherwise call one of the tools.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavReport {
    pub summary: String,
    pub success: bool,
    pub last_url: String,
    pub turns_used: usize,
}

/// Runs one sub-task in a fresh navigator conversation on the shared
/// session. Gateway failures end the sub-task and are returned.
pub fn run_subtask(
    step: usize,
    directive: &PlannerDirective,
    rt: &mut Runtime<'_>,
    config: &AgentConfig,
) -> Result<NavReport, LlmError> {
    rt.trace.push(TraceEvent::NavBegin {
        step,
        subtask: directive.subtask.clone(),
    });
    let result = converse(step, directive, rt, config);
    let report = match &result {
        Ok(r) => r.clone(),
        Err((e, turns)) => NavReport {
            summary: format!("The sub-task was interrupted by an LLM gateway error: {e}"),
            success: false,
            last_url: rt.session.current_url(),
            turns_used: *turns,
        },
    };
    rt.trace.push(TraceEvent::NavEnd { step, report });
    result.map_err(|(e, _)| e)
}

fn converse(
    step: usize,
    directive: &PlannerDirective,
    rt: &mut Runtime<'_>,
    config: &AgentConfig,
) -> Result<NavReport, (LlmError, usize)> {
    let tools = rt.skills.descriptors();
    let mut messages = vec![
        ChatMessage::system(config.navigator_prompt.clone()),
        ChatMessage::user(directive.subtask.clone()),
    ];
    let failure = FailurePatterns::default();
    for turn in 1..=config.max_nav_turns {
        let request = ChatRequest {
            agent: AgentLabel::Navigator,
            model: config.navigator_model.clone(),
            temperature: config.temperature,
            messages: messages.clone(),
            tools: tools.clone(),
        };
        let response = rt.gateway.complete(&request);
        rt.trace.push(TraceEvent::NavRequest {
            step,
            turn,
            ordinal: rt.gateway.ordinal() + u64::from(response.is_err()),
            request,
        });
        let response = response.map_err(|e| {
            rt.trace.push(TraceEvent::GatewayError {
                agent: AgentLabel::Navigator,
                error: e.to_string(),
            });
            (e, turn)
        })?;
        match response {
            ChatResponse::ToolCall { call, .. } => {
                rt.trace.push(TraceEvent::SkillCall {
                    step,
                    turn,
                    call: call.clone(),
                });
                let result = rt
                    .skills
                    .execute(&mut *rt.session, &call.name, &call.arguments);
                let message = result.to_tool_message();
                rt.trace.push(TraceEvent::SkillResult {
                    step,
                    turn,
                    name: call.name.clone(),
                    result,
                });
                let id = call.id.clone();
                messages.push(ChatMessage::assistant_tool_call(call));
                messages.push(ChatMessage::tool(id, message));
            }
            ChatResponse::Text { text, .. } => {
                if let Some(i) = text.find(SUBTASK_DONE_SENTINEL) {
                    let mut summary = format!(
                        "{} {}",
                        text[..i].trim(),
                        text[i + SUBTASK_DONE_SENTINEL.len()..].trim()
                    );
                    summary = summary.trim().to_string();
                    if summary.is_empty() {
                        summary = "Sub-task finished.".into();
                    }
                    return Ok(NavReport {
                        success: !failure.admits_failure(&summary),
                        summary,
                        last_url: rt.session.current_url(),
                        turns_used: turn,
                    });
                }
                rt.trace.push(TraceEvent::NavText {
                    step,
                    turn,
                    text: text.clone(),
                });
                messages.push(ChatMessage::assistant(text));
                messages.push(ChatMessage::user(NUDGE));
            }
        }
    }
    let last_url = rt.session.current_url();
    Ok(NavReport {
        summary: format!(
            "I could not find a way to complete the sub-task \"{}\" within {} turns. Last URL: {last_url}",
            directive.subtask, config.max_nav_turns
        ),
        success: false,
        last_url,
        turns_used: config.max_nav_turns,
    })
}
