use std::fmt;

use serde::{Deserialize, Serialize};

use super::Mmid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Element,
    Text,
    /// Comments survive parsing so the distiller can prove it drops them.
    Comment,
}

/// Attribute list in source order. Names are lowercase and unique.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attributes(Vec<(String, String)>);

impl Attributes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.iter().any(|(k, _)| k == name)
    }

    /// Sets `name`, keeping its original position when it already exists.
    pub fn set(&mut self, name: impl Into<String>, value: impl Into<String>) {
        let name = name.into().to_ascii_lowercase();
        let value = value.into();
        match self.0.iter_mut().find(|(k, _)| *k == name) {
            Some(slot) => slot.1 = value,
            None => self.0.push((name, value)),
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<String> {
        let idx = self.0.iter().position(|(k, _)| k == name)?;
        Some(self.0.remove(idx).1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Attributes {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut attrs = Attributes::new();
        for (k, v) in iter {
            let k = k.into().to_ascii_lowercase();
            if !attrs.contains(&k) {
                attrs.0.push((k, v.into()));
            }
        }
        attrs
    }
}

/// Position of a node as child indices from the root (all node kinds counted).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePath(pub Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn child(&self, idx: usize) -> Self {
        let mut v = self.0.clone();
        v.push(idx);
        Self(v)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// True when `self` is a strict ancestor of `other`.
    pub fn is_ancestor_of(&self, other: &NodePath) -> bool {
        self.0.len() < other.0.len() && other.0.starts_with(&self.0)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/")?;
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("/"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomNode {
    pub(crate) node_id: usize,
    kind: NodeKind,
    tag: String,
    attributes: Attributes,
    text: String,
    children: Vec<DomNode>,
    mmid: Option<Mmid>,
}

impl DomNode {
    pub fn element(tag: impl Into<String>, attributes: Attributes) -> Self {
        Self {
            node_id: 0,
            kind: NodeKind::Element,
            tag: tag.into().to_ascii_lowercase(),
            attributes,
            text: String::new(),
            children: Vec::new(),
            mmid: None,
        }
    }

    pub fn text_node(text: impl Into<String>) -> Self {
        Self {
            node_id: 0,
            kind: NodeKind::Text,
            tag: String::new(),
            attributes: Attributes::new(),
            text: text.into(),
            children: Vec::new(),
            mmid: None,
        }
    }

    pub fn comment(text: impl Into<String>) -> Self {
        Self {
            kind: NodeKind::Comment,
            ..Self::text_node(text)
        }
    }

    pub fn with_children(mut self, children: Vec<DomNode>) -> Self {
        debug_assert!(self.is_element());
        self.children = children;
        self
    }

    pub fn with_mmid(mut self, mmid: Mmid) -> Self {
        debug_assert!(self.is_element());
        self.mmid = Some(mmid);
        self
    }

    /// Document-order ordinal. Internal; never shown to the model.
    pub fn node_id(&self) -> usize {
        self.node_id
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn is_element(&self) -> bool {
        self.kind == NodeKind::Element
    }

    pub fn is_text(&self) -> bool {
        self.kind == NodeKind::Text
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn attributes(&self) -> &Attributes {
        &self.attributes
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn children(&self) -> &[DomNode] {
        &self.children
    }

    pub fn element_children(&self) -> impl Iterator<Item = &DomNode> {
        self.children.iter().filter(|c| c.is_element())
    }

    pub fn mmid(&self) -> Option<Mmid> {
        self.mmid
    }

    pub(crate) fn set_mmid(&mut self, mmid: Option<Mmid>) {
        self.mmid = mmid;
    }

    pub(crate) fn attributes_mut(&mut self) -> &mut Attributes {
        &mut self.attributes
    }

    pub(crate) fn children_mut(&mut self) -> &mut Vec<DomNode> {
        &mut self.children
    }

    pub(crate) fn set_text(&mut self, text: String) {
        self.text = text;
    }

    pub fn child_at(&self, path: &NodePath) -> Option<&DomNode> {
        let mut node = self;
        for &i in &path.0 {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    pub(crate) fn child_at_mut(&mut self, path: &NodePath) -> Option<&mut DomNode> {
        let mut node = self;
        for &i in &path.0 {
            node = node.children.get_mut(i)?;
        }
        Some(node)
    }

    /// Concatenated descendant text, raw (no whitespace normalization).
    pub fn text_content(&self) -> String {
        let mut out = String::new();
        self.collect_text(&mut out);
        out
    }

    fn collect_text(&self, out: &mut String) {
        match self.kind {
            NodeKind::Text => out.push_str(&self.text),
            NodeKind::Comment => {}
            NodeKind::Element => {
                for c in &self.children {
                    c.collect_text(out);
                }
            }
        }
    }

    /// Concatenation of this element's own text children.
    pub fn own_text(&self) -> String {
        self.children
            .iter()
            .filter(|c| c.is_text())
            .map(|c| c.text.as_str())
            .collect()
    }

    /// Pre-order traversal starting at `self` (included), with relative paths.
    pub fn walk(&self) -> Walk<'_> {
        Walk {
            stack: vec![(NodePath::root(), self)],
        }
    }

    pub(crate) fn renumber(&mut self, next: &mut usize) {
        self.node_id = *next;
        *next += 1;
        for c in &mut self.children {
            c.renumber(next);
        }
    }
}

pub struct Walk<'a> {
    stack: Vec<(NodePath, &'a DomNode)>,
}

impl<'a> Iterator for Walk<'a> {
    type Item = (NodePath, &'a DomNode);

    fn next(&mut self) -> Option<Self::Item> {
        let (path, node) = self.stack.pop()?;
        for (i, c) in node.children.iter().enumerate().rev() {
            self.stack.push((path.child(i), c));
        }
        Some((path, node))
    }
}
