//! Change observation: what an action did to the page, as records and as
//! a sentence for the model.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distill::{is_interactive, quote, widget_role, NameContext, WidgetRole};
use crate::dom::{collapse_whitespace, DomNode, DomSnapshot, Mmid};

pub const DEFAULT_WATCHLIST: &[&str] = &[
    "aria-expanded",
    "aria-selected",
    "aria-hidden",
    "open",
    "value",
    "checked",
    "disabled",
    "class",
];

/// Cap on element descriptors listed per added or removed subtree.
pub const MAX_REPORTED_ELEMENTS: usize = 10;

const TEXT_EXEMPT_TAGS: &[&str] = &["script", "style", "noscript", "template"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChangeError {
    #[error("attribute watchlist must not be empty")]
    EmptyWatchlist,
}

/// Ordered, deduplicated, lowercase attribute names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct AttributeWatchlist(Vec<String>);

impl AttributeWatchlist {
    pub fn new<I, S>(names: I) -> Result<Self, ChangeError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<String> = Vec::new();
        for n in names {
            let n = n.as_ref().trim().to_ascii_lowercase();
            if !n.is_empty() && !out.contains(&n) {
                out.push(n);
            }
        }
        if out.is_empty() {
            return Err(ChangeError::EmptyWatchlist);
        }
        Ok(Self(out))
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.iter().any(|n| n == name)
    }
}

impl Default for AttributeWatchlist {
    fn default() -> Self {
        Self::new(DEFAULT_WATCHLIST).expect("default list is non-empty")
    }
}

impl TryFrom<Vec<String>> for AttributeWatchlist {
    type Error = ChangeError;

    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<AttributeWatchlist> for Vec<String> {
    fn from(w: AttributeWatchlist) -> Self {
        w.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    NodesAdded,
    NodesRemoved,
    AttributeChanged,
    TextChanged,
    NavigationOccurred,
}

/// Short reference to an element, as shown to the model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementDescriptor {
    pub mmid: Option<Mmid>,
    pub tag: String,
    pub role: WidgetRole,
    pub name: String,
}

impl ElementDescriptor {
    pub fn describe(node: &DomNode, names: &NameContext<'_>) -> Self {
        Self {
            mmid: node.mmid(),
            tag: node.tag().to_string(),
            role: widget_role(node),
            name: names.name(node, None),
        }
    }
}

impl std::fmt::Display for ElementDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(m) = self.mmid {
            write!(f, "[{m}] ")?;
        }
        write!(f, "{} {}", self.tag, self.role)?;
        if !self.name.is_empty() {
            write!(f, " {}", quote(&self.name))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubtreeSummary {
    pub root: ElementDescriptor,
    pub element_count: usize,
    /// Interactive elements of the subtree in document order, capped.
    pub interactive: Vec<ElementDescriptor>,
    /// Interactive elements beyond the cap.
    pub overflow: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChangeDetail {
    Subtree(SubtreeSummary),
    Attribute {
        name: String,
        old: Option<String>,
        new: Option<String>,
    },
    Text {
        old: String,
        new: String,
    },
    Navigation {
        from: String,
        to: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub kind: ChangeKind,
    pub mmid: Option<Mmid>,
    /// Structural locator of the subject, e.g. `html/body[1]/div[0]`.
    pub locator: String,
    pub detail: ChangeDetail,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeObservation {
    pub records: Vec<ChangeRecord>,
    pub settled: bool,
}

impl ChangeObservation {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn with_settled(mut self, settled: bool) -> Self {
        self.settled = settled;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Identity {
    Mmid(Mmid),
    Structural(String, Vec<usize>),
}

struct Entry<'a> {
    node: &'a DomNode,
    parent: Option<usize>,
    locator: String,
    identity: Identity,
}

fn index(snapshot: &DomSnapshot) -> Vec<Entry<'_>> {
    fn visit<'a>(
        node: &'a DomNode,
        parent: Option<usize>,
        locator: String,
        epath: &mut Vec<usize>,
        out: &mut Vec<Entry<'a>>,
    ) {
        let identity = match node.mmid() {
            Some(m) => Identity::Mmid(m),
            None => Identity::Structural(node.tag().to_string(), epath.clone()),
        };
        let me = out.len();
        out.push(Entry {
            node,
            parent,
            locator: locator.clone(),
            identity,
        });
        for (i, c) in node.element_children().enumerate() {
            epath.push(i);
            visit(
                c,
                Some(me),
                format!("{locator}/{}[{i}]", c.tag()),
                epath,
                out,
            );
            epath.pop();
        }
    }
    let mut out = Vec::new();
    let root = snapshot.root();
    visit(
        root,
        None,
        root.tag().to_string(),
        &mut Vec::new(),
        &mut out,
    );
    out
}

/// Diffs two snapshots of one session.
///
/// A URL change yields a single `NavigationOccurred` record. Otherwise
/// elements are matched by mmid, or by tag plus structural path when they
/// have none. Records follow post-snapshot document order, then removals in
/// pre-snapshot order.
pub fn diff_snapshots(
    pre: &DomSnapshot,
    post: &DomSnapshot,
    watchlist: &AttributeWatchlist,
) -> ChangeObservation {
    if pre.url() != post.url() {
        return ChangeObservation {
            records: vec![ChangeRecord {
                kind: ChangeKind::NavigationOccurred,
                mmid: None,
                locator: String::new(),
                detail: ChangeDetail::Navigation {
                    from: pre.url().to_string(),
                    to: post.url().to_string(),
                },
            }],
            settled: true,
        };
    }
    let pre_entries = index(pre);
    let post_entries = index(post);
    let pre_by_id: HashMap<&Identity, usize> = pre_entries
        .iter()
        .enumerate()
        .map(|(i, e)| (&e.identity, i))
        .collect();
    let post_by_id: HashMap<&Identity, usize> = post_entries
        .iter()
        .enumerate()
        .map(|(i, e)| (&e.identity, i))
        .collect();
    let pre_names = NameContext::new(pre);
    let post_names = NameContext::new(post);

    let mut records = Vec::new();
    for (i, e) in post_entries.iter().enumerate() {
        match pre_by_id.get(&e.identity) {
            None => {
                let parent_matched = e
                    .parent
                    .is_none_or(|p| pre_by_id.contains_key(&post_entries[p].identity));
                if parent_matched {
                    records.push(subtree_record(
                        ChangeKind::NodesAdded,
                        &post_entries,
                        i,
                        &post_names,
                    ));
                }
            }
            Some(&j) => {
                let before = pre_entries[j].node;
                let after = e.node;
                for name in watchlist.names() {
                    let old = before.attr(name);
                    let new = after.attr(name);
                    if old != new {
                        records.push(ChangeRecord {
                            kind: ChangeKind::AttributeChanged,
                            mmid: after.mmid(),
                            locator: e.locator.clone(),
                            detail: ChangeDetail::Attribute {
                                name: name.clone(),
                                old: old.map(str::to_string),
                                new: new.map(str::to_string),
                            },
                        });
                    }
                }
                if !TEXT_EXEMPT_TAGS.contains(&after.tag()) {
                    let old = collapse_whitespace(&before.own_text());
                    let new = collapse_whitespace(&after.own_text());
                    if old != new {
                        records.push(ChangeRecord {
                            kind: ChangeKind::TextChanged,
                            mmid: after.mmid(),
                            locator: e.locator.clone(),
                            detail: ChangeDetail::Text { old, new },
                        });
                    }
                }
            }
        }
    }
    for (i, e) in pre_entries.iter().enumerate() {
        if post_by_id.contains_key(&e.identity) {
            continue;
        }
        let parent_matched = e
            .parent
            .is_none_or(|p| post_by_id.contains_key(&pre_entries[p].identity));
        if parent_matched {
            records.push(subtree_record(
                ChangeKind::NodesRemoved,
                &pre_entries,
                i,
                &pre_names,
            ));
        }
    }
    ChangeObservation {
        records,
        settled: true,
    }
}

fn subtree_record(
    kind: ChangeKind,
    entries: &[Entry<'_>],
    root: usize,
    names: &NameContext<'_>,
) -> ChangeRecord {
    let node = entries[root].node;
    let mut element_count = 0;
    let mut interactive = Vec::new();
    let mut overflow = 0;
    for (_, n) in node.walk() {
        if !n.is_element() {
            continue;
        }
        element_count += 1;
        if is_interactive(n) {
            if interactive.len() < MAX_REPORTED_ELEMENTS {
                interactive.push(ElementDescriptor::describe(n, names));
            } else {
                overflow += 1;
            }
        }
    }
    ChangeRecord {
        kind,
        mmid: node.mmid(),
        locator: entries[root].locator.clone(),
        detail: ChangeDetail::Subtree(SubtreeSummary {
            root: ElementDescriptor::describe(node, names),
            element_count,
            interactive,
            overflow,
        }),
    }
}

fn value_phrase(v: &Option<String>) -> String {
    match v {
        Some(s) => quote(s),
        None => "absent".to_string(),
    }
}

fn list_elements(out: &mut String, items: &[ElementDescriptor], overflow: usize) {
    let joined = items
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&joined);
    if overflow > 0 {
        let _ = write!(out, ", and {overflow} more");
    }
}

/// Renders feedback for the model: the action, then one cause-and-effect
/// sentence per record.
pub fn render_feedback(observation: &ChangeObservation, action_description: &str) -> String {
    let action = action_description.trim().trim_end_matches('.');
    let mut out = format!("{action}.");
    if observation.records.is_empty() {
        out.push_str(" No visible change was detected.");
        return out;
    }
    for r in &observation.records {
        out.push(' ');
        match &r.detail {
            ChangeDetail::Navigation { from, to } => {
                let _ = write!(
                    out,
                    "As a consequence, the page navigated from {} to {}.",
                    quote(from),
                    quote(to)
                );
            }
            ChangeDetail::Subtree(s) => match r.kind {
                ChangeKind::NodesAdded if !s.interactive.is_empty() => {
                    out.push_str(
                        "As a consequence, a popup has appeared with following elements: ",
                    );
                    list_elements(&mut out, &s.interactive, s.overflow);
                    out.push_str(". This means a menu has appeared where you may need to make further selection.");
                }
                ChangeKind::NodesAdded => {
                    let _ = write!(
                        out,
                        "As a consequence, new content has appeared: {} with {} element(s).",
                        s.root, s.element_count
                    );
                }
                _ => {
                    let _ = write!(
                        out,
                        "As a consequence, {} with {} element(s) has disappeared",
                        s.root, s.element_count
                    );
                    if !s.interactive.is_empty() {
                        out.push_str(", including ");
                        list_elements(&mut out, &s.interactive, s.overflow);
                    }
                    out.push('.');
                }
            },
            ChangeDetail::Attribute { name, old, new } => {
                let _ = write!(
                    out,
                    "As a consequence, attribute {} of {} changed from {} to {}.",
                    quote(name),
                    subject(r),
                    value_phrase(old),
                    value_phrase(new)
                );
            }
            ChangeDetail::Text { old, new } => {
                let _ = write!(
                    out,
                    "As a consequence, the text of {} changed from {} to {}.",
                    subject(r),
                    quote(old),
                    quote(new)
                );
            }
        }
    }
    out
}

fn subject(r: &ChangeRecord) -> String {
    match r.mmid {
        Some(m) => format!("the element with mmid {m}"),
        None => format!("the element at {}", r.locator),
    }
}
