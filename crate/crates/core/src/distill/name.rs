use std::collections::HashMap;

use super::rules::{input_type, is_hidden, is_noise_tag};
use crate::dom::{collapse_whitespace, DomNode, DomSnapshot};

/// Names longer than this are cut and suffixed with an ellipsis.
pub const MAX_NAME_CHARS: usize = 100;

/// Per-snapshot lookup tables for accessible-name computation.
pub struct NameContext<'a> {
    by_id: HashMap<&'a str, &'a DomNode>,
    label_for: HashMap<&'a str, &'a DomNode>,
}

impl<'a> NameContext<'a> {
    pub fn new(snapshot: &'a DomSnapshot) -> Self {
        let mut by_id = HashMap::new();
        let mut label_for = HashMap::new();
        for (_, node) in snapshot.walk() {
            if !node.is_element() {
                continue;
            }
            if let Some(id) = node.attr("id") {
                by_id.entry(id).or_insert(node);
            }
            if node.tag() == "label" {
                if let Some(target) = node.attr("for") {
                    label_for.entry(target).or_insert(node);
                }
            }
        }
        Self { by_id, label_for }
    }

    /// Simplified accessible name: aria-label, aria-labelledby, associated
    /// label, placeholder-like attributes, then visible text.
    pub fn name(&self, node: &DomNode, enclosing_label: Option<&DomNode>) -> String {
        truncate(collapse_whitespace(&self.raw_name(node, enclosing_label)))
    }

    /// Name from aria-label or aria-labelledby only; used for containers,
    /// whose text content is already represented by their children.
    pub fn explicit_name(&self, node: &DomNode) -> String {
        truncate(collapse_whitespace(
            &self.aria_name(node).unwrap_or_default(),
        ))
    }

    fn aria_name(&self, node: &DomNode) -> Option<String> {
        if let Some(l) = node.attr("aria-label").filter(|l| !l.trim().is_empty()) {
            return Some(l.to_string());
        }
        if let Some(ids) = node.attr("aria-labelledby") {
            let joined = ids
                .split_whitespace()
                .filter_map(|id| self.by_id.get(id))
                .map(|n| visible_text(n))
                .collect::<Vec<_>>()
                .join(" ");
            if !joined.trim().is_empty() {
                return Some(joined);
            }
        }
        None
    }

    fn raw_name(&self, node: &DomNode, enclosing_label: Option<&DomNode>) -> String {
        if !node.is_element() {
            return String::new();
        }
        if let Some(n) = self.aria_name(node) {
            return n;
        }
        let tag = node.tag();
        if matches!(tag, "input" | "select" | "textarea") {
            let label = node
                .attr("id")
                .and_then(|id| self.label_for.get(id).copied())
                .or(enclosing_label);
            if let Some(label) = label {
                let text = label_text(label);
                if !text.trim().is_empty() {
                    return text;
                }
            }
            for attr in ["placeholder", "title"] {
                if let Some(v) = node.attr(attr).filter(|v| !v.trim().is_empty()) {
                    return v.to_string();
                }
            }
            if tag == "input" {
                let t = input_type(node);
                if matches!(t.as_str(), "button" | "submit" | "reset") {
                    return node
                        .attr("value")
                        .unwrap_or(match t.as_str() {
                            "submit" => "Submit",
                            "reset" => "Reset",
                            _ => "",
                        })
                        .to_string();
                }
                if t == "image" {
                    return node.attr("alt").unwrap_or_default().to_string();
                }
            }
            return String::new();
        }
        if tag == "img" {
            return node.attr("alt").unwrap_or_default().to_string();
        }
        let text = visible_text(node);
        if !text.trim().is_empty() {
            return text;
        }
        node.attr("title")
            .or_else(|| descendant_alt(node))
            .unwrap_or_default()
            .to_string()
    }
}

fn truncate(s: String) -> String {
    if s.chars().count() <= MAX_NAME_CHARS {
        return s;
    }
    let mut out: String = s.chars().take(MAX_NAME_CHARS).collect();
    out.push('…');
    out
}

fn descendant_alt(node: &DomNode) -> Option<&str> {
    node.walk()
        .find(|(_, n)| n.tag() == "img" && n.attr("alt").is_some_and(|a| !a.trim().is_empty()))
        .and_then(|(_, n)| n.attr("alt"))
}

/// Text content ignoring noise and hidden subtrees, with spaces at block edges.
pub fn visible_text(node: &DomNode) -> String {
    let mut out = String::new();
    push_visible(node, &mut out, &[]);
    out
}

fn label_text(label: &DomNode) -> String {
    let mut out = String::new();
    push_visible(label, &mut out, &["select", "textarea", "option"]);
    out
}

fn push_visible(node: &DomNode, out: &mut String, skip: &[&str]) {
    if node.is_text() {
        out.push_str(node.text());
        return;
    }
    if !node.is_element()
        || is_noise_tag(node.tag())
        || is_hidden(node)
        || skip.contains(&node.tag())
    {
        return;
    }
    let block = super::is_block_tag(node.tag());
    if block {
        out.push(' ');
    }
    for c in node.children() {
        push_visible(c, out, skip);
    }
    if block {
        out.push(' ');
    }
}
