//! Denoised page representations for the navigation agent.
//!
//! Three content types are offered. `text_only` is the visible text with
//! block-level line breaks. `input_fields` lists the controls used to fill
//! and submit forms. `all_fields` lists every interactive element together
//! with headings, labels and landmark containers, nested as in the page.
//!
//! Element views render one element per line:
//!
//! ```text
//! [3] form other "Search"
//!   [4] input textbox "Query" type="search" name="q"
//!   [5] button button "Go"
//! ```

mod name;
mod rules;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{collapse_whitespace, DomNode, DomSnapshot, Mmid, NodePath};

pub use name::{visible_text, NameContext, MAX_NAME_CHARS};
pub use rules::{
    accepts_text, explicit_role, is_form_group, is_heading, is_hidden, is_interactive, is_labeling,
    is_landmark, is_noise_tag, widget_role, InteractiveRules, WidgetRole, INTERACTIVE_ROLES,
    NOISE_TAGS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentType {
    TextOnly,
    InputFields,
    AllFields,
}

impl ContentType {
    pub const ALL: [ContentType; 3] = [
        ContentType::TextOnly,
        ContentType::InputFields,
        ContentType::AllFields,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContentType::TextOnly => "text_only",
            ContentType::InputFields => "input_fields",
            ContentType::AllFields => "all_fields",
        }
    }
}

impl fmt::Display for ContentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContentType {
    type Err = DistillError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "text_only" => Ok(ContentType::TextOnly),
            "input_fields" => Ok(ContentType::InputFields),
            "all_fields" => Ok(ContentType::AllFields),
            other => Err(DistillError::InvalidContentType(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistillError {
    #[error("element at {locator} has no mmid")]
    UnassignedMmids { locator: String },
    #[error("element subsets need element views, got {0}")]
    ContentTypeMismatch(ContentType),
    #[error("unknown content type {0:?}; expected text_only, input_fields or all_fields")]
    InvalidContentType(String),
}

/// Attributes that survive distillation.
pub const DEFAULT_ATTRIBUTE_WHITELIST: &[&str] = &[
    "id",
    "name",
    "type",
    "value",
    "placeholder",
    "href",
    "role",
    "aria-label",
    "aria-expanded",
    "aria-selected",
    "alt",
    "title",
    "checked",
    "disabled",
];

pub const HREF_MAX_CHARS: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistillConfig {
    pub rules: InteractiveRules,
    pub attribute_whitelist: Vec<String>,
    pub href_max_chars: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            rules: InteractiveRules::default(),
            attribute_whitelist: DEFAULT_ATTRIBUTE_WHITELIST
                .iter()
                .map(|s| s.to_string())
                .collect(),
            href_max_chars: HREF_MAX_CHARS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistilledElement {
    pub mmid: Mmid,
    pub tag: String,
    pub role: WidgetRole,
    pub name: String,
    pub kept_attributes: Vec<(String, String)>,
    pub children: Vec<DistilledElement>,
}

impl DistilledElement {
    /// Preorder walk yielding each element with its depth.
    pub fn walk(&self) -> impl Iterator<Item = (usize, &DistilledElement)> {
        let mut stack = vec![(0usize, self)];
        std::iter::from_fn(move || {
            let (depth, el) = stack.pop()?;
            stack.extend(el.children.iter().rev().map(|c| (depth + 1, c)));
            Some((depth, el))
        })
    }

    fn render_line(&self, depth: usize, out: &mut String) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push_str(&format!("[{}] {} {}", self.mmid, self.tag, self.role));
        if !self.name.is_empty() {
            out.push(' ');
            out.push_str(&quote(&self.name));
        }
        for (k, v) in &self.kept_attributes {
            out.push_str(&format!(" {k}={}", quote(v)));
        }
        out.push('\n');
    }
}

pub(crate) fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewBody {
    Text(String),
    Elements(Vec<DistilledElement>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistilledView {
    pub content_type: ContentType,
    pub url: String,
    pub body: ViewBody,
    pub approx_tokens: usize,
}

impl DistilledView {
    pub fn render(&self) -> String {
        match &self.body {
            ViewBody::Text(t) => t.clone(),
            ViewBody::Elements(forest) => {
                let mut out = String::new();
                for root in forest {
                    for (depth, el) in root.walk() {
                        el.render_line(depth, &mut out);
                    }
                }
                out
            }
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = &DistilledElement> {
        let forest: &[DistilledElement] = match &self.body {
            ViewBody::Elements(f) => f,
            ViewBody::Text(_) => &[],
        };
        forest.iter().flat_map(|r| r.walk().map(|(_, e)| e))
    }

    pub fn mmids(&self) -> BTreeSet<Mmid> {
        self.elements().map(|e| e.mmid).collect()
    }
}

/// `ceil(chars / 4)` over the rendered view.
pub fn estimate_tokens(view: &DistilledView) -> usize {
    estimate_text_tokens(&view.render())
}

pub fn estimate_text_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Whether every mmid in `a` also appears in `b`.
pub fn element_subset(a: &DistilledView, b: &DistilledView) -> Result<bool, DistillError> {
    for v in [a, b] {
        if v.content_type == ContentType::TextOnly {
            return Err(DistillError::ContentTypeMismatch(ContentType::TextOnly));
        }
    }
    Ok(a.mmids().is_subset(&b.mmids()))
}

pub fn distill(
    snapshot: &DomSnapshot,
    content_type: ContentType,
) -> Result<DistilledView, DistillError> {
    distill_with(snapshot, content_type, &DistillConfig::default())
}

pub fn distill_with(
    snapshot: &DomSnapshot,
    content_type: ContentType,
    config: &DistillConfig,
) -> Result<DistilledView, DistillError> {
    let body = match content_type {
        ContentType::TextOnly => ViewBody::Text(text_only(snapshot.root())),
        ContentType::InputFields | ContentType::AllFields => {
            let mut b = Builder {
                snapshot,
                config,
                names: NameContext::new(snapshot),
                content_type,
            };
            let frame = Frame {
                in_select: false,
                label: None,
            };
            ViewBody::Elements(b.build(snapshot.root(), &NodePath::root(), frame)?)
        }
    };
    let mut view = DistilledView {
        content_type,
        url: snapshot.url().to_string(),
        body,
        approx_tokens: 0,
    };
    view.approx_tokens = estimate_tokens(&view);
    Ok(view)
}

const BLOCK_TAGS: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "body",
    "caption",
    "dd",
    "details",
    "dialog",
    "div",
    "dl",
    "dt",
    "fieldset",
    "figcaption",
    "figure",
    "footer",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hr",
    "html",
    "legend",
    "li",
    "main",
    "menu",
    "nav",
    "ol",
    "option",
    "p",
    "pre",
    "section",
    "summary",
    "table",
    "tbody",
    "tfoot",
    "thead",
    "tr",
    "ul",
    "br",
];

pub(crate) fn is_block_tag(tag: &str) -> bool {
    BLOCK_TAGS.contains(&tag)
}

/// Inline elements that read as separate words.
const SPACED_TAGS: &[&str] = &[
    "td", "th", "label", "input", "button", "select", "textarea", "img",
];

fn text_only(root: &DomNode) -> String {
    let mut lines = Vec::new();
    let mut line = String::new();
    push_text_lines(root, &mut line, &mut lines);
    flush_line(&mut line, &mut lines);
    lines.join("\n")
}

fn flush_line(line: &mut String, lines: &mut Vec<String>) {
    let collapsed = collapse_whitespace(line);
    if !collapsed.is_empty() {
        lines.push(collapsed);
    }
    line.clear();
}

fn push_text_lines(node: &DomNode, line: &mut String, lines: &mut Vec<String>) {
    if node.is_text() {
        line.extend(
            node.text()
                .chars()
                .map(|c| if c.is_whitespace() { ' ' } else { c }),
        );
        return;
    }
    if !node.is_element() || is_noise_tag(node.tag()) || is_hidden(node) {
        return;
    }
    let tag = node.tag();
    let block = is_block_tag(tag);
    let spaced = SPACED_TAGS.contains(&tag);
    if block {
        flush_line(line, lines);
    } else if spaced {
        line.push(' ');
    }
    for c in node.children() {
        push_text_lines(c, line, lines);
    }
    if block {
        flush_line(line, lines);
    } else if spaced {
        line.push(' ');
    }
}

#[derive(Clone, Copy)]
struct Frame<'a> {
    in_select: bool,
    label: Option<&'a DomNode>,
}

struct Builder<'a> {
    snapshot: &'a DomSnapshot,
    config: &'a DistillConfig,
    names: NameContext<'a>,
    content_type: ContentType,
}

impl<'a> Builder<'a> {
    fn build(
        &mut self,
        node: &'a DomNode,
        path: &NodePath,
        frame: Frame<'a>,
    ) -> Result<Vec<DistilledElement>, DistillError> {
        if !node.is_element() || is_noise_tag(node.tag()) || is_hidden(node) {
            return Ok(Vec::new());
        }
        let child_frame = Frame {
            in_select: frame.in_select || node.tag() == "select",
            label: if node.tag() == "label" {
                Some(node)
            } else {
                frame.label
            },
        };
        let mut children = Vec::new();
        for (i, c) in node.children().iter().enumerate() {
            children.extend(self.build(c, &path.child(i), child_frame)?);
        }

        let interactive = self.config.rules.is_interactive(node);
        let (keep, container) = match self.content_type {
            ContentType::InputFields => (
                interactive && is_input_field(node, frame.in_select),
                is_form_group(node),
            ),
            _ => (
                interactive || is_heading(node) || is_labeling(node),
                is_form_group(node) || is_landmark(node),
            ),
        };

        if keep {
            let mmid = self.require_mmid(node, path)?;
            return Ok(vec![self.element(node, mmid, frame, children)]);
        }
        if !container || children.is_empty() {
            return Ok(children);
        }
        match (self.content_type, node.mmid()) {
            // Grouping in input_fields is best-effort: only when ids exist.
            (ContentType::InputFields, None) => Ok(children),
            (ContentType::InputFields, Some(m)) => Ok(vec![self.element(node, m, frame, children)]),
            _ => {
                let collapsible = !is_form_group(node) && self.names.explicit_name(node).is_empty();
                if collapsible && children.len() == 1 {
                    return Ok(children);
                }
                let mmid = self.require_mmid(node, path)?;
                Ok(vec![self.element(node, mmid, frame, children)])
            }
        }
    }

    fn require_mmid(&self, node: &DomNode, path: &NodePath) -> Result<Mmid, DistillError> {
        node.mmid().ok_or_else(|| DistillError::UnassignedMmids {
            locator: self.snapshot.locator(path),
        })
    }

    fn element(
        &self,
        node: &DomNode,
        mmid: Mmid,
        frame: Frame<'_>,
        children: Vec<DistilledElement>,
    ) -> DistilledElement {
        let kept_attributes = node
            .attributes()
            .iter()
            .filter(|(k, _)| self.config.attribute_whitelist.iter().any(|w| w == k))
            .map(|(k, v)| {
                let v = if k == "href" {
                    v.chars().take(self.config.href_max_chars).collect()
                } else {
                    v.to_string()
                };
                (k.to_string(), v)
            })
            .collect();
        DistilledElement {
            mmid,
            tag: node.tag().to_string(),
            role: widget_role(node),
            name: if interactive_or_text_named(node) {
                self.names.name(node, frame.label)
            } else {
                self.names.explicit_name(node)
            },
            kept_attributes,
            children,
        }
    }
}

fn interactive_or_text_named(node: &DomNode) -> bool {
    !(is_landmark(node) || is_form_group(node)) || is_interactive(node)
}

/// Controls used to fill in and submit forms. Links and menu items are not
/// fields; options count only inside a `select`.
fn is_input_field(node: &DomNode, in_select: bool) -> bool {
    if node.tag() == "option" {
        return in_select;
    }
    matches!(node.tag(), "input" | "textarea" | "select" | "button")
        || matches!(
            widget_role(node),
            WidgetRole::Button
                | WidgetRole::Textbox
                | WidgetRole::Combobox
                | WidgetRole::Listbox
                | WidgetRole::Checkbox
        )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::{assign_mmids, parse_html, MmidPolicy};

    fn snap(html: &str, policy: MmidPolicy) -> DomSnapshot {
        assign_mmids(parse_html(html, "https://x.test/").unwrap(), policy)
    }

    #[test]
    fn content_type_strings() {
        for ct in ContentType::ALL {
            assert_eq!(ct.as_str().parse::<ContentType>().unwrap(), ct);
            assert_eq!(serde_json::to_string(&ct).unwrap(), format!("\"{ct}\""));
        }
        assert_eq!(
            "screenshot".parse::<ContentType>(),
            Err(DistillError::InvalidContentType("screenshot".into()))
        );
    }

    #[test]
    fn text_only_flattens_inline() {
        let s = snap("<p>Hello <b>world</b></p>", MmidPolicy::InteractiveOnly);
        let v = distill(&s, ContentType::TextOnly).unwrap();
        assert_eq!(v.render(), "Hello world");
    }

    #[test]
    fn text_only_breaks_blocks_and_drops_noise() {
        let s = snap(
            "<title>T</title><h1>Head</h1><div>a<span>b</span></div><script>bad()</script><p hidden>gone</p><table><tr><td>1</td><td>2</td></tr></table>",
            MmidPolicy::InteractiveOnly,
        );
        let v = distill(&s, ContentType::TextOnly).unwrap();
        assert_eq!(v.render(), "Head\nab\n1 2");
    }

    #[test]
    fn input_fields_exclude_paragraphs() {
        let s = snap(
            r#"<p>para</p><input name="q">"#,
            MmidPolicy::InteractiveOnly,
        );
        let v = distill(&s, ContentType::InputFields).unwrap();
        let tags: Vec<_> = v.elements().map(|e| e.tag.as_str()).collect();
        assert_eq!(tags, ["input"]);
        assert_eq!(v.render(), "[1] input textbox name=\"q\"\n");
    }

    #[test]
    fn input_fields_keep_form_grouping_when_identified() {
        let s = snap(
            r#"<form id="f"><label>Q <input name="q"></label><button>Go</button></form><a href="/x">x</a>"#,
            MmidPolicy::AllElements,
        );
        let v = distill(&s, ContentType::InputFields).unwrap();
        let lines: Vec<_> = v.render().lines().map(str::to_string).collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("form"));
        assert!(lines[1].starts_with("  ") && lines[1].contains("\"Q\""));
        assert!(lines[2].starts_with("  ") && lines[2].contains("button button \"Go\""));
    }

    #[test]
    fn all_fields_needs_all_elements_policy() {
        let s = snap(
            "<h1>Title</h1><button>b</button>",
            MmidPolicy::InteractiveOnly,
        );
        assert!(matches!(
            distill(&s, ContentType::AllFields),
            Err(DistillError::UnassignedMmids { .. })
        ));
    }

    #[test]
    fn all_fields_collapses_wrappers_but_nests_genuine_groups() {
        let s = snap(
            r#"<nav><ul><li><a href="/a">A</a></li><li><a href="/b">B</a></li></ul></nav><section><div><button>Only</button></div></section>"#,
            MmidPolicy::AllElements,
        );
        let v = distill(&s, ContentType::AllFields).unwrap();
        let out = v.render();
        let lines: Vec<_> = out.lines().collect();
        // nav has one child (ul) so it collapses; ul keeps two links.
        assert!(lines[0].contains(" ul "), "{out}");
        assert!(lines[1].starts_with("  ") && lines[1].contains("\"A\""));
        assert!(lines[2].starts_with("  ") && lines[2].contains("\"B\""));
        assert!(lines[3].starts_with('[') && lines[3].contains("\"Only\""));
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn attributes_are_whitelisted_and_href_truncated() {
        let long = "x".repeat(300);
        let s = snap(
            &format!(r#"<a href="/{long}" class="c" data-track="1" onclick="t()">L</a>"#),
            MmidPolicy::AllElements,
        );
        let v = distill(&s, ContentType::AllFields).unwrap();
        let el = v.elements().next().unwrap();
        assert_eq!(el.kept_attributes.len(), 1);
        assert_eq!(el.kept_attributes[0].1.chars().count(), HREF_MAX_CHARS);
    }

    #[test]
    fn subset_checks() {
        let s = snap(
            r#"<form><input><button>s</button></form><a href="/l">link</a>"#,
            MmidPolicy::AllElements,
        );
        let inputs = distill(&s, ContentType::InputFields).unwrap();
        let all = distill(&s, ContentType::AllFields).unwrap();
        let text = distill(&s, ContentType::TextOnly).unwrap();
        assert_eq!(element_subset(&inputs, &all), Ok(true));
        assert_eq!(element_subset(&all, &all), Ok(true));
        assert_eq!(element_subset(&all, &inputs), Ok(false));
        assert!(element_subset(&text, &all).is_err());
    }

    #[test]
    fn token_estimate_formula() {
        let mut v = DistilledView {
            content_type: ContentType::TextOnly,
            url: String::new(),
            body: ViewBody::Text(String::new()),
            approx_tokens: 0,
        };
        assert_eq!(estimate_tokens(&v), 0);
        v.body = ViewBody::Text("a".repeat(400));
        assert_eq!(estimate_tokens(&v), 100);
        v.body = ViewBody::Text("a".repeat(401));
        assert_eq!(estimate_tokens(&v), 101);
    }

    #[test]
    fn select_options_nest_under_select() {
        let s = snap(
            "<select name=s><option>One</option><option>Two</option></select>",
            MmidPolicy::InteractiveOnly,
        );
        let v = distill(&s, ContentType::InputFields).unwrap();
        let ViewBody::Elements(f) = &v.body else {
            panic!()
        };
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].children.len(), 2);
        assert_eq!(f[0].children[1].name, "Two");
    }
}
