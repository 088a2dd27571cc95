//! Primitive skills of the navigation agent.
//!
//! Sensing skills read the page through a distilled view. Action skills
//! take a snapshot before and after acting and report the difference as
//! feedback, so the model learns what its action did.

mod guard;
mod keys;
mod registry;
mod session;
mod user;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::change::{diff_snapshots, render_feedback, AttributeWatchlist, ChangeObservation};
use crate::distill::{accepts_text, distill, estimate_text_tokens, is_hidden, ContentType};
use crate::dom::{DomSnapshot, Mmid};

pub use guard::{GuardError, UrlGuard};
pub use keys::{Key, KeyChord, Modifier, UnknownKey};
pub use registry::{
    navigator_skills, ParamKind, ParamSpec, SkillDescriptor, ASK_USER, CLICK, ENTER_TEXT,
    GET_CURRENT_URL, GET_DOM, OPEN_URL, PRESS_KEYS,
};
pub use session::{ActionEffect, BrowserSession, PageAction, SessionError, BLANK_URL};
pub use user::{ChannelError, ScriptedChannel, StdinChannel, UserChannel};

/// get_dom payloads above this many estimated tokens are truncated.
pub const DEFAULT_DOM_TOKEN_BUDGET: usize = 24_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillErrorCode {
    ElementNotFound,
    ElementNotInteractable,
    NotTextInput,
    UnknownKey,
    InvalidArguments,
    InvalidContentType,
    GuardRejected,
    NavigationFailed,
    SkillDisabled,
    ChannelClosed,
    UnknownSkill,
    SessionError,
}

impl SkillErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            SkillErrorCode::ElementNotFound => "element_not_found",
            SkillErrorCode::ElementNotInteractable => "element_not_interactable",
            SkillErrorCode::NotTextInput => "not_text_input",
            SkillErrorCode::UnknownKey => "unknown_key",
            SkillErrorCode::InvalidArguments => "invalid_arguments",
            SkillErrorCode::InvalidContentType => "invalid_content_type",
            SkillErrorCode::GuardRejected => "guard_rejected",
            SkillErrorCode::NavigationFailed => "navigation_failed",
            SkillErrorCode::SkillDisabled => "skill_disabled",
            SkillErrorCode::ChannelClosed => "channel_closed",
            SkillErrorCode::UnknownSkill => "unknown_skill",
            SkillErrorCode::SessionError => "session_error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillError {
    pub code: SkillErrorCode,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillResult {
    pub ok: bool,
    pub payload: String,
    pub feedback: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<SkillError>,
    /// Structured diff behind `feedback`, for action skills.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ChangeObservation>,
}

impl SkillResult {
    pub fn sensed(payload: impl Into<String>) -> Self {
        Self {
            ok: true,
            payload: payload.into(),
            feedback: String::new(),
            error: None,
            observation: None,
        }
    }

    pub fn acted(
        payload: impl Into<String>,
        feedback: String,
        observation: ChangeObservation,
    ) -> Self {
        Self {
            ok: true,
            payload: payload.into(),
            feedback,
            error: None,
            observation: Some(observation),
        }
    }

    pub fn failed(code: SkillErrorCode, message: impl Into<String>) -> Self {
        Self {
            ok: false,
            payload: String::new(),
            feedback: String::new(),
            error: Some(SkillError {
                code,
                message: message.into(),
            }),
            observation: None,
        }
    }

    /// Text of the tool message returned to the model.
    pub fn to_tool_message(&self) -> String {
        if let Some(e) = &self.error {
            return format!("Error ({}): {}", e.code.as_str(), e.message);
        }
        match (self.feedback.is_empty(), self.payload.is_empty()) {
            (true, _) => self.payload.clone(),
            (false, true) => self.feedback.clone(),
            (false, false) => format!("{}\n{}", self.feedback, self.payload),
        }
    }
}

impl From<SessionError> for SkillResult {
    fn from(e: SessionError) -> Self {
        let code = match &e {
            SessionError::ElementNotFound(_) => SkillErrorCode::ElementNotFound,
            SessionError::ElementNotInteractable(_) => SkillErrorCode::ElementNotInteractable,
            SessionError::NotTextInput(_) => SkillErrorCode::NotTextInput,
            SessionError::NavigationFailed(_) => SkillErrorCode::NavigationFailed,
            _ => SkillErrorCode::SessionError,
        };
        SkillResult::failed(code, e.to_string())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillMode {
    #[default]
    Autonomous,
    HumanInTheLoop,
}

/// Executes skills against a session.
pub struct SkillSet {
    pub guard: UrlGuard,
    pub mode: SkillMode,
    pub watchlist: AttributeWatchlist,
    pub dom_token_budget: usize,
    channel: Option<Box<dyn UserChannel>>,
}

impl Default for SkillSet {
    fn default() -> Self {
        Self {
            guard: UrlGuard::default(),
            mode: SkillMode::Autonomous,
            watchlist: AttributeWatchlist::default(),
            dom_token_budget: DEFAULT_DOM_TOKEN_BUDGET,
            channel: None,
        }
    }
}

impl std::fmt::Debug for SkillSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SkillSet")
            .field("guard", &self.guard)
            .field("mode", &self.mode)
            .field("dom_token_budget", &self.dom_token_budget)
            .finish_non_exhaustive()
    }
}

impl SkillSet {
    pub fn new(guard: UrlGuard) -> Self {
        Self {
            guard,
            ..Self::default()
        }
    }

    /// Enables `ask_user` with the given channel.
    pub fn with_user(mut self, channel: Box<dyn UserChannel>) -> Self {
        self.mode = SkillMode::HumanInTheLoop;
        self.channel = Some(channel);
        self
    }

    pub fn with_dom_token_budget(mut self, budget: usize) -> Self {
        self.dom_token_budget = budget;
        self
    }

    pub fn descriptors(&self) -> Vec<SkillDescriptor> {
        navigator_skills(self.mode == SkillMode::HumanInTheLoop)
    }

    /// Dispatches a tool call by name with JSON arguments.
    pub fn execute(
        &mut self,
        session: &mut dyn BrowserSession,
        name: &str,
        args: &Value,
    ) -> SkillResult {
        match self.dispatch(session, name, args) {
            Ok(r) | Err(r) => r,
        }
    }

    fn dispatch(
        &mut self,
        session: &mut dyn BrowserSession,
        name: &str,
        args: &Value,
    ) -> Result<SkillResult, SkillResult> {
        Ok(match name {
            OPEN_URL => self.open_url(session, str_arg(args, "url")?),
            CLICK => self.click(session, mmid_arg(args, "mmid")?),
            ENTER_TEXT => self.enter_text(session, mmid_arg(args, "mmid")?, str_arg(args, "text")?),
            PRESS_KEYS => {
                let keys = keys_arg(args)?;
                let target = match args.get("mmid") {
                    None | Some(Value::Null) => None,
                    Some(_) => Some(mmid_arg(args, "mmid")?),
                };
                self.press_keys(session, &keys, target)
            }
            GET_DOM => self.get_dom(session, str_arg(args, "content_type")?),
            GET_CURRENT_URL => self.get_current_url(session),
            ASK_USER => self.ask_user(str_arg(args, "prompt")?),
            other => SkillResult::failed(
                SkillErrorCode::UnknownSkill,
                format!("no skill named {other:?}"),
            ),
        })
    }

    pub fn open_url(&mut self, session: &mut dyn BrowserSession, url: &str) -> SkillResult {
        let parsed = match self.guard.check(url) {
            Ok(u) => u,
            Err(e @ GuardError::Rejected(_)) => {
                return SkillResult::failed(SkillErrorCode::GuardRejected, e.to_string())
            }
            Err(e) => return SkillResult::failed(SkillErrorCode::InvalidArguments, e.to_string()),
        };
        let pre = session.snapshot().ok();
        let post = match session.navigate(parsed.as_str()) {
            Ok(s) => s,
            Err(e) => return e.into(),
        };
        let action = format!("Opened URL {}", parsed.as_str());
        let observation = match &pre {
            Some(pre) => diff_snapshots(pre, &post, &self.watchlist),
            None => ChangeObservation::default().with_settled(true),
        };
        let feedback = render_feedback(&observation, &action);
        let payload = format!("URL: {}\nTitle: {}", post.url(), post.title());
        SkillResult::acted(payload, feedback, observation)
    }

    pub fn click(&mut self, session: &mut dyn BrowserSession, mmid: Mmid) -> SkillResult {
        self.act(
            session,
            PageAction::Click { target: mmid },
            format!("Clicked the element with mmid {mmid}"),
        )
    }

    pub fn enter_text(
        &mut self,
        session: &mut dyn BrowserSession,
        mmid: Mmid,
        text: &str,
    ) -> SkillResult {
        let action = PageAction::EnterText {
            target: mmid,
            text: text.to_string(),
        };
        let description = format!(
            "Entered text {} into the element with mmid {mmid}",
            crate::distill::quote(text)
        );
        self.act(session, action, description)
    }

    pub fn press_keys(
        &mut self,
        session: &mut dyn BrowserSession,
        keys: &[KeyChord],
        target: Option<Mmid>,
    ) -> SkillResult {
        if keys.is_empty() {
            return SkillResult::failed(
                SkillErrorCode::UnknownKey,
                "at least one key chord is required",
            );
        }
        let list = keys
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        let description = match target {
            Some(m) => format!("Pressed {list} on the element with mmid {m}"),
            None => format!("Pressed {list}"),
        };
        let action = PageAction::PressKeys {
            target,
            keys: keys.to_vec(),
        };
        self.act(session, action, description)
    }

    fn act(
        &mut self,
        session: &mut dyn BrowserSession,
        action: PageAction,
        description: String,
    ) -> SkillResult {
        let pre = match session.snapshot() {
            Ok(s) => s,
            Err(e) => return e.into(),
        };
        if let Some(target) = action.target() {
            if let Err(r) = check_target(&pre, target, &action) {
                return r;
            }
        }
        let effect = match session.perform(&action) {
            Ok(e) => e,
            Err(e) => return e.into(),
        };
        let observation =
            diff_snapshots(&pre, &effect.snapshot, &self.watchlist).with_settled(effect.settled);
        let feedback = render_feedback(&observation, &description);
        SkillResult::acted(
            format!("URL: {}", effect.snapshot.url()),
            feedback,
            observation,
        )
    }

    pub fn get_dom(&mut self, session: &mut dyn BrowserSession, content_type: &str) -> SkillResult {
        let ct: ContentType = match content_type.parse() {
            Ok(ct) => ct,
            Err(e) => {
                return SkillResult::failed(SkillErrorCode::InvalidContentType, format!("{e}"))
            }
        };
        let snapshot = match session.snapshot() {
            Ok(s) => s,
            Err(e) => return e.into(),
        };
        match distill(&snapshot, ct) {
            Ok(view) => {
                SkillResult::sensed(truncate_to_budget(&view.render(), self.dom_token_budget))
            }
            Err(e) => SkillResult::failed(SkillErrorCode::SessionError, e.to_string()),
        }
    }

    pub fn get_current_url(&mut self, session: &mut dyn BrowserSession) -> SkillResult {
        SkillResult::sensed(session.current_url())
    }

    pub fn ask_user(&mut self, prompt: &str) -> SkillResult {
        let channel = match (self.mode, self.channel.as_mut()) {
            (SkillMode::HumanInTheLoop, Some(c)) => c,
            _ => {
                return SkillResult::failed(
                    SkillErrorCode::SkillDisabled,
                    "ask_user is disabled in autonomous mode",
                )
            }
        };
        match channel.ask(prompt) {
            Ok(reply) => SkillResult::sensed(reply),
            Err(e) => SkillResult::failed(SkillErrorCode::ChannelClosed, e.to_string()),
        }
    }
}

fn check_target(pre: &DomSnapshot, target: Mmid, action: &PageAction) -> Result<(), SkillResult> {
    let node = pre
        .find_by_mmid(target)
        .map_err(|_| SessionError::ElementNotFound(target))?;
    let path = pre.path_of(target).expect("indexed mmid has a path");
    let hidden = is_hidden(node) || pre.ancestors(path).into_iter().any(is_hidden);
    if hidden || node.attributes().contains("disabled") {
        return Err(SessionError::ElementNotInteractable(target).into());
    }
    if matches!(action, PageAction::EnterText { .. }) && !accepts_text(node) {
        return Err(SessionError::NotTextInput(target).into());
    }
    Ok(())
}

/// Depth-first line prefix that fits the budget, plus a notice.
pub fn truncate_to_budget(rendered: &str, budget_tokens: usize) -> String {
    if estimate_text_tokens(rendered) <= budget_tokens {
        return rendered.to_string();
    }
    let total = rendered.lines().count();
    let limit = budget_tokens.saturating_mul(4).saturating_sub(200);
    let mut out = String::new();
    let mut kept = 0;
    for line in rendered.lines() {
        if out.chars().count() + line.chars().count() + 1 > limit {
            break;
        }
        out.push_str(line);
        out.push('\n');
        kept += 1;
    }
    out.push_str(&format!(
        "[truncated: the view exceeded {budget_tokens} estimated tokens; showing {kept} of {total} lines. Request a narrower content type to see less.]"
    ));
    out
}

fn str_arg<'a>(args: &'a Value, key: &str) -> Result<&'a str, SkillResult> {
    args.get(key).and_then(Value::as_str).ok_or_else(|| {
        SkillResult::failed(
            SkillErrorCode::InvalidArguments,
            format!("missing string argument {key:?}"),
        )
    })
}

fn mmid_arg(args: &Value, key: &str) -> Result<Mmid, SkillResult> {
    let parsed = match args.get(key) {
        Some(Value::Number(n)) => n
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .and_then(Mmid::new),
        Some(Value::String(s)) => s.parse().ok(),
        _ => None,
    };
    parsed.ok_or_else(|| {
        SkillResult::failed(
            SkillErrorCode::InvalidArguments,
            format!("argument {key:?} must be a positive integer mmid"),
        )
    })
}

fn keys_arg(args: &Value) -> Result<Vec<KeyChord>, SkillResult> {
    let raw: Vec<&str> = match args.get("keys") {
        Some(Value::String(s)) => vec![s.as_str()],
        Some(Value::Array(items)) => items.iter().filter_map(Value::as_str).collect(),
        _ => {
            return Err(SkillResult::failed(
                SkillErrorCode::InvalidArguments,
                "argument \"keys\" must be a list of key chords",
            ))
        }
    };
    raw.into_iter()
        .map(|k| {
            k.parse::<KeyChord>()
                .map_err(|e| SkillResult::failed(SkillErrorCode::UnknownKey, e.to_string()))
        })
        .collect()
}
