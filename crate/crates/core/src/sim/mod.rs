//! Simulated websites: static pages plus a table of action-triggered DOM
//! transitions, served through the same session contract as a browser.
//!
//! A site is one JSON document:
//!
//! ```json
//! {
//!   "name": "popup-menu",
//!   "start_url": "https://sports.test/",
//!   "pages": { "https://sports.test/": "<html>...</html>" },
//!   "transitions": [
//!     {
//!       "page": "https://sports.test/",
//!       "trigger": { "action": "click", "selector": "button#menu-soccer",
//!                    "state": [{ "selector": "button#menu-soccer",
//!                                "attribute": "aria-expanded",
//!                                "predicate": { "equals": "false" } }] },
//!       "effect": { "type": "insert_subtree", "anchor": "div#menu-slot", "html": "<ul>...</ul>" }
//!     }
//!   ]
//! }
//! ```
//!
//! Rules whose trigger matches are applied in table order; a `navigate`
//! effect ends the sequence. With no matching rule, clicks follow links and
//! toggle checkboxes, typed text lands in the `value` attribute, and
//! everything else is a no-op.

pub mod fixtures;
mod selector;
mod session;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{parse_html, DomNode};

pub use selector::{Selector, SelectorError};
pub use session::{apply_action, SimSession};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerAction {
    Click,
    EnterText,
    PressKeys,
}

/// Case-insensitive string test.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextPredicate {
    Equals(String),
    Prefix(String),
    Contains(String),
    NotContains(String),
}

impl TextPredicate {
    pub fn holds(&self, subject: &str) -> bool {
        let s = subject.to_lowercase();
        match self {
            TextPredicate::Equals(p) => s == p.to_lowercase(),
            TextPredicate::Prefix(p) => s.starts_with(&p.to_lowercase()),
            TextPredicate::Contains(p) => s.contains(&p.to_lowercase()),
            TextPredicate::NotContains(p) => !s.contains(&p.to_lowercase()),
        }
    }
}

/// Condition on the current page: the first element matching `selector`
/// has `attribute` satisfying `predicate` (a missing attribute reads as "").
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatePredicate {
    pub selector: Selector,
    pub attribute: String,
    pub predicate: TextPredicate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub action: TriggerAction,
    /// Matches the action target or any of its ancestors.
    pub selector: Selector,
    /// All must hold. Subject is the typed text for enter_text, the target's
    /// value after the keys for press_keys, the target's text for click.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub text: Vec<TextPredicate>,
    /// press_keys only: one of the pressed chords, e.g. "Enter".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    /// All must hold before the action.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub state: Vec<StatePredicate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Effect {
    Navigate {
        url: String,
    },
    InsertSubtree {
        anchor: Selector,
        html: String,
    },
    RemoveSubtree {
        selector: Selector,
    },
    /// A null value removes the attribute.
    SetAttribute {
        selector: Selector,
        name: String,
        value: Option<String>,
    },
    SetText {
        selector: Selector,
        value: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRule {
    pub page: String,
    pub trigger: Trigger,
    pub effect: Effect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSiteSpec {
    pub name: String,
    pub start_url: String,
    pub pages: BTreeMap<String, String>,
    #[serde(default)]
    pub transitions: Vec<TransitionRule>,
}

impl SimSiteSpec {
    pub fn from_json(json: &str) -> Result<Self, SimError> {
        serde_json::from_str(json).map_err(|e| SimError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("site spec is not valid JSON: {0}")]
    Format(String),
    #[error("site spec failed validation: {}", .problems.join("; "))]
    SpecValidation { problems: Vec<String> },
    #[error("cannot read site spec {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Drops the fragment and normalizes through the URL parser.
pub(crate) fn normalize_url(raw: &str) -> String {
    match url::Url::parse(raw.trim()) {
        Ok(mut u) => {
            u.set_fragment(None);
            u.to_string()
        }
        Err(_) => raw.trim().to_string(),
    }
}

/// A validated site, cheap to share between sessions.
#[derive(Debug)]
pub struct SimSite {
    pub(crate) spec: SimSiteSpec,
    pub(crate) pages: BTreeMap<String, String>,
    pub(crate) hosts: BTreeSet<String>,
    pub(crate) start_url: String,
}

impl SimSite {
    pub fn new(spec: SimSiteSpec) -> Result<Arc<Self>, SimError> {
        let mut problems = Vec::new();
        let mut pages = BTreeMap::new();
        let mut hosts = BTreeSet::new();
        for (raw, html) in &spec.pages {
            match url::Url::parse(raw) {
                Ok(u) => {
                    if let Some(h) = u.host_str() {
                        hosts.insert(h.to_ascii_lowercase());
                    }
                    pages.insert(normalize_url(raw), html.clone());
                }
                Err(_) => problems.push(format!("page key {raw:?} is not an absolute URL")),
            }
        }
        let start_url = normalize_url(&spec.start_url);
        if !pages.contains_key(&start_url) {
            problems.push(format!(
                "start_url {:?} is not among the pages",
                spec.start_url
            ));
        }

        let mut parsed: BTreeMap<String, Vec<DomNode>> = BTreeMap::new();
        for (i, rule) in spec.transitions.iter().enumerate() {
            let page = normalize_url(&rule.page);
            let Some(html) = pages.get(&page) else {
                problems.push(format!(
                    "transition {i}: page {:?} is not among the pages",
                    rule.page
                ));
                continue;
            };
            let trees = parsed.entry(page.clone()).or_insert_with(|| {
                let mut trees = vec![parse_html(html, &page)
                    .map(|s| s.root().clone())
                    .unwrap_or_else(|_| empty())];
                for r in spec
                    .transitions
                    .iter()
                    .filter(|r| normalize_url(&r.page) == page)
                {
                    if let Effect::InsertSubtree { html, .. } = &r.effect {
                        trees.push(
                            parse_html(html, &page)
                                .map(|s| s.root().clone())
                                .unwrap_or_else(|_| empty()),
                        );
                    }
                }
                trees
            });
            let resolves = |sel: &Selector| trees.iter().any(|t| sel.find_in(t).is_some());
            let mut selectors = vec![&rule.trigger.selector];
            selectors.extend(rule.trigger.state.iter().map(|st| &st.selector));
            match &rule.effect {
                Effect::InsertSubtree { anchor, .. } => selectors.push(anchor),
                Effect::RemoveSubtree { selector }
                | Effect::SetAttribute { selector, .. }
                | Effect::SetText { selector, .. } => selectors.push(selector),
                Effect::Navigate { url } => {
                    if url::Url::parse(&page).and_then(|b| b.join(url)).is_err() {
                        problems.push(format!(
                            "transition {i}: navigate target {url:?} is not a URL"
                        ));
                    }
                }
            }
            for sel in selectors {
                if !resolves(sel) {
                    problems.push(format!(
                        "transition {i}: selector {sel} does not resolve on {page}"
                    ));
                }
            }
            if let Some(k) = &rule.trigger.key {
                if k.parse::<crate::skills::KeyChord>().is_err() {
                    problems.push(format!("transition {i}: unknown key {k:?}"));
                }
            }
        }
        if !problems.is_empty() {
            return Err(SimError::SpecValidation { problems });
        }
        Ok(Arc::new(Self {
            spec,
            pages,
            hosts,
            start_url,
        }))
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn spec(&self) -> &SimSiteSpec {
        &self.spec
    }

    pub fn start_url(&self) -> &str {
        &self.start_url
    }

    /// A fresh session at the start page.
    pub fn session(self: &Arc<Self>) -> SimSession {
        SimSession::open(Arc::clone(self), true)
    }

    /// A fresh session on a blank page.
    pub fn blank_session(self: &Arc<Self>) -> SimSession {
        SimSession::open(Arc::clone(self), false)
    }
}

fn empty() -> DomNode {
    DomNode::element("html", Default::default())
}

/// Validates `spec` and opens a session at its start page.
pub fn load_site(spec: SimSiteSpec) -> Result<SimSession, SimError> {
    Ok(SimSite::new(spec)?.session())
}

pub fn load_site_file(path: &std::path::Path) -> Result<Arc<SimSite>, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    SimSite::new(SimSiteSpec::from_json(&text)?)
}
