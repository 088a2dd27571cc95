use ego_tree::NodeRef;
use scraper::{Html, Node};

use super::{Attributes, DomError, DomNode, DomSnapshot, Mmid, MMID_ATTRIBUTE};

/// Default input cap: 16 MiB.
pub const DEFAULT_MAX_BYTES: usize = 16 * 1024 * 1024;

/// Deeper elements are re-attached at this depth, like Blink's parser.
const MAX_DEPTH: usize = 512;

#[derive(Clone, Debug)]
pub struct ParseOptions {
    pub max_bytes: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            max_bytes: DEFAULT_MAX_BYTES,
        }
    }
}

/// Error-recovering HTML parse. Mmids are not assigned; any `mmid`
/// attribute in the source is dropped.
pub fn parse_html(html: &str, url: &str) -> Result<DomSnapshot, DomError> {
    parse_with(html, url, &ParseOptions::default(), false)
}

/// Lossy UTF-8 decode followed by [`parse_html`].
pub fn parse_html_bytes(
    bytes: &[u8],
    url: &str,
    opts: &ParseOptions,
) -> Result<DomSnapshot, DomError> {
    if bytes.len() > opts.max_bytes {
        return Err(DomError::InputTooLarge {
            size: bytes.len(),
            limit: opts.max_bytes,
        });
    }
    parse_with(&String::from_utf8_lossy(bytes), url, opts, false)
}

/// Parses HTML serialized from a live page where mmids were injected as
/// attributes; valid, unique `mmid` values become node mmids.
pub fn parse_instrumented_html(html: &str, url: &str) -> Result<DomSnapshot, DomError> {
    parse_with(html, url, &ParseOptions::default(), true)
}

pub(crate) fn parse_with(
    html: &str,
    url: &str,
    opts: &ParseOptions,
    adopt_mmids: bool,
) -> Result<DomSnapshot, DomError> {
    if html.len() > opts.max_bytes {
        return Err(DomError::InputTooLarge {
            size: html.len(),
            limit: opts.max_bytes,
        });
    }
    let doc = Html::parse_document(html);
    let root_el = doc
        .tree
        .root()
        .children()
        .find(|c| matches!(c.value(), Node::Element(_)));
    let mut root = match root_el {
        Some(el) => {
            let mut node = convert_element(el);
            let mut ctx = Ctx {
                adopt_mmids,
                seen: Default::default(),
                open_forms: 0,
            };
            ctx.adopt(&mut node, el);
            convert_children(el, 1, &mut node, &mut ctx);
            node
        }
        None => DomNode::element("html", Attributes::new()),
    };
    if root.tag() != "html" {
        root = DomNode::element("html", Attributes::new()).with_children(vec![root]);
    }
    Ok(DomSnapshot::new(root, url))
}

struct Ctx {
    adopt_mmids: bool,
    seen: std::collections::HashSet<Mmid>,
    open_forms: usize,
}

impl Ctx {
    fn adopt(&mut self, node: &mut DomNode, src: NodeRef<'_, Node>) {
        if !self.adopt_mmids {
            return;
        }
        let Node::Element(el) = src.value() else {
            return;
        };
        let parsed = el
            .attrs()
            .find(|(k, _)| k.eq_ignore_ascii_case(MMID_ATTRIBUTE))
            .and_then(|(_, v)| v.parse::<Mmid>().ok());
        if let Some(m) = parsed {
            if self.seen.insert(m) {
                node.set_mmid(Some(m));
            }
        }
    }
}

fn convert_element(src: NodeRef<'_, Node>) -> DomNode {
    let Node::Element(el) = src.value() else {
        unreachable!("caller checked for an element");
    };
    let attrs: Attributes = el
        .attrs()
        .filter(|(k, _)| !k.eq_ignore_ascii_case(MMID_ATTRIBUTE))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    DomNode::element(el.name(), attrs)
}

/// Appends converted children of `src` to `dest`. Past `MAX_DEPTH` the
/// subtree is flattened into `dest` as siblings. A form inside a form is
/// unwrapped, since reparsing the serialization would drop it.
fn convert_children(src: NodeRef<'_, Node>, depth: usize, dest: &mut DomNode, ctx: &mut Ctx) {
    for child in src.children() {
        match child.value() {
            Node::Element(el) if el.name() == "form" && ctx.open_forms > 0 => {
                convert_children(child, depth, dest, ctx);
            }
            Node::Element(el) => {
                let is_form = el.name() == "form";
                let mut node = convert_element(child);
                ctx.adopt(&mut node, child);
                ctx.open_forms += usize::from(is_form);
                if depth < MAX_DEPTH {
                    convert_children(child, depth + 1, &mut node, ctx);
                    dest.children_mut().push(node);
                } else {
                    dest.children_mut().push(node);
                    for d in child.descendants().skip(1) {
                        flatten_one(d, dest, ctx);
                    }
                }
                ctx.open_forms -= usize::from(is_form);
            }
            Node::Text(t) => push_text(dest, t),
            Node::Comment(c) => dest.children_mut().push(DomNode::comment(&**c)),
            // Template contents hang off a fragment child.
            Node::Fragment => convert_children(child, depth, dest, ctx),
            _ => {}
        }
    }
}

fn flatten_one(src: NodeRef<'_, Node>, dest: &mut DomNode, ctx: &mut Ctx) {
    match src.value() {
        Node::Element(el) if el.name() != "form" => {
            let mut node = convert_element(src);
            ctx.adopt(&mut node, src);
            dest.children_mut().push(node);
        }
        Node::Text(t) => push_text(dest, t),
        Node::Comment(c) => dest.children_mut().push(DomNode::comment(&**c)),
        _ => {}
    }
}

fn push_text(dest: &mut DomNode, text: &str) {
    if text.is_empty() {
        return;
    }
    let children = dest.children_mut();
    if let Some(last) = children.last_mut() {
        if last.is_text() {
            let mut merged = last.text().to_string();
            merged.push_str(text);
            last.set_text(merged);
            return;
        }
    }
    children.push(DomNode::text_node(text));
}
