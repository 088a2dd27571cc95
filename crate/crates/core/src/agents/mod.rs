//! Planner and navigation agent.
//!
//! The planner sees the task, its own earlier directives and the
//! navigator's reports. Each delegated sub-task runs in a new navigator
//! conversation against the same browser session; only the report comes
//! back.

mod navigator;
mod planner;

use serde::{Deserialize, Serialize};

use crate::harness::FailurePatterns;
use crate::llm::{CallLedger, LlmGateway};
use crate::skills::{BrowserSession, SkillSet};
use crate::trace::{Trace, TraceEvent};

pub use navigator::{run_subtask, NavReport, SUBTASK_DONE_SENTINEL};
pub use planner::{
    parse_directive, plan_next, planner_messages, DirectiveKind, DirectiveParseError, PlanError,
    PlannerDirective, TERMINATE_SENTINEL,
};

pub const PLANNER_PROMPT: &str = include_str!("../../prompts/planner.txt");
pub const NAVIGATOR_PROMPT: &str = include_str!("../../prompts/navigator.txt");

pub const DEFAULT_MAX_PLANNER_STEPS: usize = 15;
pub const DEFAULT_MAX_NAV_TURNS: usize = 25;
pub const DEFAULT_MODEL: &str = "gpt-4-turbo";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_planner_steps: usize,
    pub max_nav_turns: usize,
    pub planner_model: String,
    pub navigator_model: String,
    pub temperature: f32,
    pub planner_prompt: String,
    pub navigator_prompt: String,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_planner_steps: DEFAULT_MAX_PLANNER_STEPS,
            max_nav_turns: DEFAULT_MAX_NAV_TURNS,
            planner_model: DEFAULT_MODEL.into(),
            navigator_model: DEFAULT_MODEL.into(),
            temperature: 0.0,
            planner_prompt: PLANNER_PROMPT.into(),
            navigator_prompt: NAVIGATOR_PROMPT.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerState {
    pub task: String,
    pub start_url: String,
    pub history: Vec<(PlannerDirective, NavReport)>,
    pub steps_used: usize,
    /// URL after each step, aligned with `history`.
    pub url_trail: Vec<String>,
}

impl PlannerState {
    pub fn new(task: impl Into<String>, start_url: impl Into<String>) -> Self {
        Self {
            task: task.into(),
            start_url: start_url.into(),
            history: Vec::new(),
            steps_used: 0,
            url_trail: Vec::new(),
        }
    }

    pub fn record(&mut self, directive: PlannerDirective, report: NavReport) {
        self.url_trail.push(report.last_url.clone());
        self.history.push((directive, report));
        self.steps_used += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Success,
    SelfAwareFailure,
    /// Claimed success contradicted by an external check.
    ObliviousCandidate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub status: OutcomeStatus,
    pub answer: String,
    /// True when the planner terminated without admitting failure.
    pub claimed_success: bool,
    pub steps_used: usize,
    pub ledger: CallLedger,
}

/// Everything one task run mutates.
pub struct Runtime<'a> {
    pub session: &'a mut dyn BrowserSession,
    pub skills: &'a mut SkillSet,
    pub gateway: &'a mut LlmGateway,
    pub trace: &'a mut Trace,
}

/// Plans and delegates until the planner terminates or a budget runs out.
pub fn run_task(
    task_id: &str,
    task: &str,
    rt: &mut Runtime<'_>,
    config: &AgentConfig,
) -> TaskOutcome {
    rt.trace.push(TraceEvent::TaskStart {
        task_id: task_id.to_string(),
        task: task.to_string(),
    });
    let mut state = PlannerState::new(task, rt.session.current_url());
    let (claimed_success, answer) = loop {
        let directive = match plan_next(&state, rt, config) {
            Ok(d) => d,
            Err(PlanError::StepBudgetExhausted(n)) => {
                break (
                    false,
                    format!("The task could not complete within step budget of {n} planner steps."),
                )
            }
            Err(PlanError::Gateway(e)) => {
                break (
                    false,
                    format!("Unable to complete the task due to LLM gateway errors: {e}"),
                )
            }
            Err(PlanError::DirectiveParse(e)) => {
                break (
                    false,
                    format!(
                    "Unable to complete the task: the planner reply could not be understood ({e})."
                ),
                )
            }
        };
        if directive.kind == DirectiveKind::Terminate {
            let answer = directive.final_answer.unwrap_or_default();
            break (!FailurePatterns::default().admits_failure(&answer), answer);
        }
        let step = state.steps_used + 1;
        match run_subtask(step, &directive, rt, config) {
            Ok(report) => state.record(directive, report),
            Err(e) => {
                break (
                    false,
                    format!("Unable to complete the task due to LLM gateway errors: {e}"),
                )
            }
        }
    };
    let outcome = TaskOutcome {
        status: if claimed_success {
            OutcomeStatus::Success
        } else {
            OutcomeStatus::SelfAwareFailure
        },
        answer,
        claimed_success,
        steps_used: state.steps_used,
        ledger: rt.gateway.ledger(),
    };
    rt.trace.push(TraceEvent::Outcome {
        outcome: outcome.clone(),
    });
    outcome
}
