use std::sync::Arc;

use super::{normalize_url, Effect, SimSite, TransitionRule, TriggerAction};
use crate::distill::{accepts_text, visible_text};
use crate::dom::{
    collapse_whitespace, parse_html, DomNode, DomSnapshot, Mmid, MmidAllocator, MmidPolicy,
    NodePath,
};
use crate::skills::{
    ActionEffect, BrowserSession, Key, KeyChord, PageAction, SessionError, BLANK_URL,
};

const BLANK_HTML: &str = "<html><head></head><body></body></html>";

fn not_found_html(url: &str) -> String {
    let escaped = url.replace('&', "&amp;").replace('<', "&lt;");
    format!(
        "<html><head><title>Not Found</title></head><body><h1>Not Found</h1><p>The page {escaped} does not exist.</p></body></html>"
    )
}

/// One browsing session on a simulated site. Single-threaded; sessions of
/// one site share nothing mutable.
#[derive(Debug)]
pub struct SimSession {
    site: Arc<SimSite>,
    page: DomSnapshot,
    alloc: MmidAllocator,
    seq: u64,
    focus: Option<Mmid>,
    closed: bool,
}

impl SimSession {
    pub(super) fn open(site: Arc<SimSite>, at_start: bool) -> Self {
        let mut s = Self {
            site,
            page: DomSnapshot::new(DomNode::element("html", Default::default()), BLANK_URL),
            alloc: MmidAllocator::new(MmidPolicy::AllElements),
            seq: 0,
            focus: None,
            closed: false,
        };
        if at_start {
            let start = s.site.start_url.clone();
            s.load(&start, s.site.pages[&start].clone());
        } else {
            s.load(BLANK_URL, BLANK_HTML.to_string());
        }
        s
    }

    pub fn site(&self) -> &Arc<SimSite> {
        &self.site
    }

    fn load(&mut self, url: &str, html: String) {
        let parsed = parse_html(&html, url)
            .unwrap_or_else(|_| parse_html(BLANK_HTML, url).expect("blank page parses"));
        self.alloc.reset();
        self.page = self.alloc.assign(parsed);
        self.focus = None;
    }

    fn ensure_open(&self) -> Result<(), SessionError> {
        if self.closed {
            Err(SessionError::Closed)
        } else {
            Ok(())
        }
    }

    fn goto(&mut self, raw: &str) -> Result<(), SessionError> {
        let target = match url::Url::parse(self.page.url()).and_then(|base| base.join(raw.trim())) {
            Ok(u) => u,
            Err(_) => url::Url::parse(raw.trim())
                .map_err(|_| SessionError::NavigationFailed(format!("bad URL {raw:?}")))?,
        };
        let normalized = normalize_url(target.as_str());
        if target.scheme() == "about" {
            self.load(&normalized, BLANK_HTML.to_string());
            return Ok(());
        }
        let host = target.host_str().unwrap_or_default().to_ascii_lowercase();
        if !self.site.hosts.contains(&host) {
            return Err(SessionError::NavigationFailed(format!(
                "could not resolve host {host:?}"
            )));
        }
        let html = self
            .site
            .pages
            .get(&normalized)
            .or_else(|| {
                let mut no_query = target.clone();
                no_query.set_query(None);
                no_query.set_fragment(None);
                self.site.pages.get(no_query.as_str())
            })
            .cloned()
            .unwrap_or_else(|| not_found_html(&normalized));
        self.load(&normalized, html);
        Ok(())
    }

    fn reassign(&mut self) {
        self.alloc.assign_tree(self.page.root_mut());
        self.page.reindex();
    }

    fn next_snapshot(&mut self) -> DomSnapshot {
        self.seq += 1;
        self.page.clone().with_seq(self.seq)
    }

    fn target_path(&self, mmid: Mmid) -> Result<NodePath, SessionError> {
        self.page
            .path_of(mmid)
            .cloned()
            .ok_or(SessionError::ElementNotFound(mmid))
    }

    fn node_mut(&mut self, path: &NodePath) -> &mut DomNode {
        self.page
            .root_mut()
            .child_at_mut(path)
            .expect("path resolved on this page")
    }

    fn matching_rules(
        &self,
        action: TriggerAction,
        target: &NodePath,
        subject: &str,
        keys: &[KeyChord],
    ) -> Vec<TransitionRule> {
        let url = self.page.url();
        let mut chain: Vec<&DomNode> = self.page.ancestors(target);
        if let Some(t) = self.page.node_at(target) {
            chain.push(t);
        }
        self.site
            .spec
            .transitions
            .iter()
            .filter(|r| r.trigger.action == action && normalize_url(&r.page) == url)
            .filter(|r| chain.iter().any(|n| r.trigger.selector.matches(n)))
            .filter(|r| r.trigger.text.iter().all(|p| p.holds(subject)))
            .filter(|r| match &r.trigger.key {
                None => true,
                Some(k) => k.parse::<KeyChord>().is_ok_and(|want| keys.contains(&want)),
            })
            .filter(|r| {
                r.trigger.state.iter().all(|st| {
                    st.selector
                        .find(&self.page)
                        .and_then(|p| self.page.node_at(&p))
                        .is_some_and(|n| st.predicate.holds(n.attr(&st.attribute).unwrap_or("")))
                })
            })
            .cloned()
            .collect()
    }

    /// Applies effects in order; stops after a navigation.
    fn apply_effects(&mut self, rules: &[TransitionRule]) -> Result<(), SessionError> {
        for rule in rules {
            match &rule.effect {
                Effect::Navigate { url } => {
                    self.goto(url)?;
                    return Ok(());
                }
                Effect::InsertSubtree { anchor, html } => {
                    if let Some(path) = anchor.find(&self.page) {
                        let url = self.page.url().to_string();
                        let fragment = fragment_nodes(html, &url);
                        self.node_mut(&path).children_mut().extend(fragment);
                    }
                }
                Effect::RemoveSubtree { selector } => {
                    if let Some(path) = selector.find(&self.page) {
                        if let Some(parent) = path.parent() {
                            let idx = *path.0.last().expect("non-root path");
                            self.node_mut(&parent).children_mut().remove(idx);
                        }
                    }
                }
                Effect::SetAttribute {
                    selector,
                    name,
                    value,
                } => {
                    if let Some(path) = selector.find(&self.page) {
                        let attrs = self.node_mut(&path).attributes_mut();
                        match value {
                            Some(v) => attrs.set(name.as_str(), v.as_str()),
                            None => {
                                attrs.remove(name);
                            }
                        }
                    }
                }
                Effect::SetText { selector, value } => {
                    if let Some(path) = selector.find(&self.page) {
                        *self.node_mut(&path).children_mut() =
                            vec![DomNode::text_node(value.as_str())];
                    }
                }
            }
            // Later rules see the page as changed by earlier ones.
            self.page.reindex();
        }
        Ok(())
    }

    fn click(&mut self, target: Mmid) -> Result<(), SessionError> {
        let path = self.target_path(target)?;
        self.focus = Some(target);
        let subject = self
            .page
            .node_at(&path)
            .map(|n| collapse_whitespace(&visible_text(n)))
            .unwrap_or_default();
        let rules = self.matching_rules(TriggerAction::Click, &path, &subject, &[]);
        if !rules.is_empty() {
            return self.apply_effects(&rules);
        }
        // Default actions, nearest first.
        let mut p = path;
        loop {
            let node = self.page.node_at(&p).expect("path on page");
            if node.tag() == "a" {
                if let Some(href) = node.attr("href") {
                    let href = href.trim();
                    if href.starts_with('#') || href.to_ascii_lowercase().starts_with("javascript:")
                    {
                        return Ok(());
                    }
                    let href = href.to_string();
                    return self.goto(&href);
                }
            }
            let toggled = match node.tag() {
                "input"
                    if matches!(
                        node.attr("type").map(str::to_ascii_lowercase).as_deref(),
                        Some("checkbox" | "radio")
                    ) =>
                {
                    Some((p.clone(), "checked"))
                }
                "summary" => p.parent().map(|d| (d, "open")),
                _ => None,
            };
            if let Some((at, attr)) = toggled {
                let attrs = self.node_mut(&at).attributes_mut();
                if attrs.remove(attr).is_none() {
                    attrs.set(attr, "");
                }
                return Ok(());
            }
            match p.parent() {
                Some(parent) => p = parent,
                None => return Ok(()),
            }
        }
    }

    fn enter_text(&mut self, target: Mmid, text: &str) -> Result<(), SessionError> {
        let path = self.target_path(target)?;
        if !self.page.node_at(&path).is_some_and(accepts_text) {
            return Err(SessionError::NotTextInput(target));
        }
        self.focus = Some(target);
        self.node_mut(&path).attributes_mut().set("value", text);
        self.page.reindex();
        let rules = self.matching_rules(TriggerAction::EnterText, &path, text, &[]);
        self.apply_effects(&rules)
    }

    fn press_keys(&mut self, target: Option<Mmid>, keys: &[KeyChord]) -> Result<(), SessionError> {
        let path = match target.or(self.focus) {
            Some(m) => match self.page.path_of(m) {
                Some(p) => p.clone(),
                None if target.is_some() => return Err(SessionError::ElementNotFound(m)),
                None => body_path(&self.page),
            },
            None => body_path(&self.page),
        };
        if let Some(m) = target {
            self.focus = Some(m);
        }
        let editable = self.page.node_at(&path).is_some_and(accepts_text);
        if editable {
            let mut value = self
                .page
                .node_at(&path)
                .and_then(|n| n.attr("value"))
                .unwrap_or("")
                .to_string();
            for chord in keys.iter().filter(|c| c.modifiers.is_empty()) {
                match chord.key {
                    Key::Backspace => {
                        value.pop();
                    }
                    k => {
                        if let Some(c) = k.printable() {
                            value.push(c);
                        }
                    }
                }
            }
            self.node_mut(&path).attributes_mut().set("value", value);
            self.page.reindex();
        }
        let subject = self
            .page
            .node_at(&path)
            .and_then(|n| n.attr("value"))
            .unwrap_or("")
            .to_string();
        let rules = self.matching_rules(TriggerAction::PressKeys, &path, &subject, keys);
        self.apply_effects(&rules)
    }
}

fn body_path(page: &DomSnapshot) -> NodePath {
    page.walk()
        .find(|(_, n)| n.tag() == "body")
        .map(|(p, _)| p)
        .unwrap_or_else(NodePath::root)
}

/// Body children of `html` parsed as a document.
fn fragment_nodes(html: &str, url: &str) -> Vec<DomNode> {
    let Ok(doc) = parse_html(html, url) else {
        return Vec::new();
    };
    let nodes = doc
        .root()
        .element_children()
        .find(|c| c.tag() == "body")
        .map(|b| b.children().to_vec())
        .unwrap_or_default();
    nodes
}

impl BrowserSession for SimSession {
    fn current_url(&self) -> String {
        self.page.url().to_string()
    }

    fn navigate(&mut self, url: &str) -> Result<DomSnapshot, SessionError> {
        self.ensure_open()?;
        self.goto(url)?;
        Ok(self.next_snapshot())
    }

    fn snapshot(&mut self) -> Result<DomSnapshot, SessionError> {
        self.ensure_open()?;
        Ok(self.next_snapshot())
    }

    fn perform(&mut self, action: &PageAction) -> Result<ActionEffect, SessionError> {
        Ok(ActionEffect {
            snapshot: apply_action(self, action)?,
            settled: true,
        })
    }

    fn close(&mut self) -> Result<(), SessionError> {
        self.closed = true;
        Ok(())
    }
}

/// Runs one action on the simulated page and returns the page after it.
/// Actions without a matching rule or default behaviour leave it unchanged.
pub fn apply_action(
    session: &mut SimSession,
    action: &PageAction,
) -> Result<DomSnapshot, SessionError> {
    session.ensure_open()?;
    let url_before = session.page.url().to_string();
    let result = match action {
        PageAction::Click { target } => session.click(*target),
        PageAction::EnterText { target, text } => session.enter_text(*target, text),
        PageAction::PressKeys { target, keys } => session.press_keys(*target, keys),
        PageAction::Navigate { url } => session.goto(url),
    };
    result?;
    if session.page.url() == url_before {
        session.reassign();
    }
    Ok(session.next_snapshot())
}
