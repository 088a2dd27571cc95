//! In-memory DOM snapshots.
//!
//! A [`DomSnapshot`] is the single source of truth for sensing: the distiller,
//! the change observer and the skills all read from it. Snapshots are plain
//! owned trees and are never mutated once handed out, so they can be shared
//! freely between readers.

mod mmid;
mod node;
mod parse;
mod serialize;

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use mmid::{assign_mmids, structural_locator, Mmid, MmidAllocator, MmidPolicy};
pub use node::{Attributes, DomNode, NodeKind, NodePath, Walk};
pub use parse::{
    parse_html, parse_html_bytes, parse_instrumented_html, ParseOptions, DEFAULT_MAX_BYTES,
};
pub use serialize::serialize_raw;

/// Attribute name reserved for injected identifiers.
pub const MMID_ATTRIBUTE: &str = "mmid";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomError {
    #[error("input of {size} bytes exceeds the {limit}-byte cap")]
    InputTooLarge { size: usize, limit: usize },
    #[error("no element with mmid {0}")]
    ElementNotFound(Mmid),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomSnapshot {
    root: DomNode,
    url: String,
    seq: u64,
    mmid_index: BTreeMap<Mmid, NodePath>,
}

impl DomSnapshot {
    /// Wraps a tree. Node ids and the mmid index are rebuilt from it.
    pub fn new(root: DomNode, url: impl Into<String>) -> Self {
        let mut snap = Self {
            root,
            url: url.into(),
            seq: 0,
            mmid_index: BTreeMap::new(),
        };
        snap.reindex();
        snap
    }

    pub fn with_seq(mut self, seq: u64) -> Self {
        self.seq = seq;
        self
    }

    pub fn root(&self) -> &DomNode {
        &self.root
    }

    pub(crate) fn root_mut(&mut self) -> &mut DomNode {
        &mut self.root
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub(crate) fn reindex(&mut self) {
        let mut next = 0;
        self.root.renumber(&mut next);
        self.mmid_index.clear();
        for (path, node) in self.root.walk() {
            if let Some(m) = node.mmid() {
                self.mmid_index.insert(m, path);
            }
        }
    }

    /// All assigned mmids in ascending order.
    pub fn mmids(&self) -> impl Iterator<Item = Mmid> + '_ {
        self.mmid_index.keys().copied()
    }

    pub fn mmid_count(&self) -> usize {
        self.mmid_index.len()
    }

    pub fn path_of(&self, mmid: Mmid) -> Option<&NodePath> {
        self.mmid_index.get(&mmid)
    }

    pub fn find_by_mmid(&self, mmid: Mmid) -> Result<&DomNode, DomError> {
        self.mmid_index
            .get(&mmid)
            .and_then(|p| self.root.child_at(p))
            .ok_or(DomError::ElementNotFound(mmid))
    }

    pub fn node_at(&self, path: &NodePath) -> Option<&DomNode> {
        self.root.child_at(path)
    }

    /// Ancestors of the node at `path`, outermost first. Excludes the node.
    pub fn ancestors(&self, path: &NodePath) -> Vec<&DomNode> {
        let mut out = Vec::with_capacity(path.depth());
        let mut node = &self.root;
        for &i in &path.0 {
            out.push(node);
            match node.children().get(i) {
                Some(c) => node = c,
                None => break,
            }
        }
        out
    }

    pub fn walk(&self) -> Walk<'_> {
        self.root.walk()
    }

    pub fn element_count(&self) -> usize {
        self.walk().filter(|(_, n)| n.is_element()).count()
    }

    /// Text of the first `<title>`, trimmed; empty when absent.
    pub fn title(&self) -> String {
        self.walk()
            .find(|(_, n)| n.is_element() && n.tag() == "title")
            .map(|(_, n)| collapse_whitespace(&n.text_content()))
            .unwrap_or_default()
    }

    pub fn locator(&self, path: &NodePath) -> String {
        structural_locator(&self.root, path)
    }

    /// Stable digest over URL and canonical serialization.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.url.as_bytes());
        h.update([0u8]);
        h.update(serialize_raw(self).as_bytes());
        hex::encode(h.finalize())
    }
}

/// Collapses whitespace runs to single spaces and trims.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_page_has_single_root_and_no_mmids() {
        let snap = parse_html("<html></html>", "about:blank").unwrap();
        assert_eq!(snap.root().tag(), "html");
        assert_eq!(snap.mmid_count(), 0);
    }

    #[test]
    fn find_unknown_mmid_errors() {
        let snap = assign_mmids(
            parse_html("<button>Go</button>", "https://x.test/").unwrap(),
            MmidPolicy::InteractiveOnly,
        );
        let one = Mmid::new(1).unwrap();
        assert_eq!(snap.find_by_mmid(one).unwrap().tag(), "button");
        let missing = Mmid::new(99).unwrap();
        assert_eq!(
            snap.find_by_mmid(missing),
            Err(DomError::ElementNotFound(missing))
        );
    }

    #[test]
    fn title_is_trimmed() {
        let snap = parse_html("<title>  Plans \n and pricing </title>", "https://x.test/").unwrap();
        assert_eq!(snap.title(), "Plans and pricing");
    }

    #[test]
    fn ancestors_outermost_first() {
        let snap = parse_html("<div><span><b>x</b></span></div>", "https://x.test/").unwrap();
        let (path, _) = snap.walk().find(|(_, n)| n.tag() == "b").unwrap();
        let tags: Vec<_> = snap
            .ancestors(&path)
            .iter()
            .map(|n| n.tag().to_string())
            .collect();
        assert_eq!(tags, ["html", "body", "div", "span"]);
    }
}
