use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::keys::KeyChord;
use crate::dom::{DomSnapshot, Mmid};

/// Start page of a session that has not navigated yet.
pub const BLANK_URL: &str = "about:blank";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PageAction {
    Click {
        target: Mmid,
    },
    EnterText {
        target: Mmid,
        text: String,
    },
    PressKeys {
        target: Option<Mmid>,
        keys: Vec<KeyChord>,
    },
    Navigate {
        url: String,
    },
}

impl PageAction {
    pub fn target(&self) -> Option<Mmid> {
        match self {
            PageAction::Click { target } | PageAction::EnterText { target, .. } => Some(*target),
            PageAction::PressKeys { target, .. } => *target,
            PageAction::Navigate { .. } => None,
        }
    }
}

/// Result of dispatching an action: the page after the settle window.
#[derive(Clone, Debug)]
pub struct ActionEffect {
    pub snapshot: DomSnapshot,
    /// False when mutations were still arriving as the window closed.
    pub settled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("no element with mmid {0}")]
    ElementNotFound(Mmid),
    #[error("element with mmid {0} is hidden or disabled")]
    ElementNotInteractable(Mmid),
    #[error("element with mmid {0} does not accept text")]
    NotTextInput(Mmid),
    #[error("navigation failed: {0}")]
    NavigationFailed(String),
    #[error("timed out after {0} ms")]
    Timeout(u64),
    #[error("page evaluation failed: {message}")]
    EvaluationFailed { message: String, retryable: bool },
    #[error("session is closed")]
    Closed,
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// A page the agent can sense and act on.
///
/// Snapshots carry mmids under the session's policy and keep them stable
/// between snapshots of one page; navigation starts a fresh numbering.
/// Calls on one session never overlap.
pub trait BrowserSession: Send {
    fn current_url(&self) -> String;

    fn navigate(&mut self, url: &str) -> Result<DomSnapshot, SessionError>;

    fn snapshot(&mut self) -> Result<DomSnapshot, SessionError>;

    fn perform(&mut self, action: &PageAction) -> Result<ActionEffect, SessionError>;

    fn close(&mut self) -> Result<(), SessionError>;
}

impl<S: BrowserSession + ?Sized> BrowserSession for Box<S> {
    fn current_url(&self) -> String {
        (**self).current_url()
    }

    fn navigate(&mut self, url: &str) -> Result<DomSnapshot, SessionError> {
        (**self).navigate(url)
    }

    fn snapshot(&mut self) -> Result<DomSnapshot, SessionError> {
        (**self).snapshot()
    }

    fn perform(&mut self, action: &PageAction) -> Result<ActionEffect, SessionError> {
        (**self).perform(action)
    }

    fn close(&mut self) -> Result<(), SessionError> {
        (**self).close()
    }
}
