use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{DomNode, DomSnapshot, NodePath};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad selector {input:?}: {reason}")]
pub struct SelectorError {
    pub input: String,
    pub reason: &'static str,
}

/// `tag#id[attr][attr=value]`, every part optional but at least one present.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Selector {
    pub tag: Option<String>,
    pub id: Option<String>,
    pub attrs: Vec<(String, Option<String>)>,
}

impl Selector {
    pub fn matches(&self, node: &DomNode) -> bool {
        if !node.is_element() {
            return false;
        }
        if self.tag.as_deref().is_some_and(|t| t != node.tag()) {
            return false;
        }
        if self.id.is_some() && node.attr("id") != self.id.as_deref() {
            return false;
        }
        self.attrs.iter().all(|(name, value)| match value {
            None => node.attributes().contains(name),
            Some(v) => node.attr(name) == Some(v.as_str()),
        })
    }

    /// First match in document order.
    pub fn find(&self, snapshot: &DomSnapshot) -> Option<NodePath> {
        self.find_in(snapshot.root())
    }

    pub fn find_in(&self, root: &DomNode) -> Option<NodePath> {
        root.walk().find(|(_, n)| self.matches(n)).map(|(p, _)| p)
    }
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | ':' | '.')
}

impl FromStr for Selector {
    type Err = SelectorError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |reason| SelectorError {
            input: input.to_string(),
            reason,
        };
        let s = input.trim();
        let mut rest = s;
        let take_ident = |rest: &mut &str| -> String {
            let end = rest.find(|c: char| !is_ident(c)).unwrap_or(rest.len());
            let (ident, tail) = rest.split_at(end);
            *rest = tail;
            ident.to_string()
        };
        let tag = take_ident(&mut rest);
        let mut sel = Selector {
            tag: (!tag.is_empty()).then(|| tag.to_ascii_lowercase()),
            id: None,
            attrs: Vec::new(),
        };
        if let Some(tail) = rest.strip_prefix('#') {
            rest = tail;
            let id = take_ident(&mut rest);
            if id.is_empty() {
                return Err(err("empty id"));
            }
            sel.id = Some(id);
        }
        while let Some(tail) = rest.strip_prefix('[') {
            let close = tail.find(']').ok_or_else(|| err("unclosed ["))?;
            let body = &tail[..close];
            rest = &tail[close + 1..];
            let (name, value) = match body.split_once('=') {
                Some((n, v)) => {
                    let v = v.trim();
                    let unquoted = v
                        .strip_prefix('"')
                        .and_then(|x| x.strip_suffix('"'))
                        .or_else(|| v.strip_prefix('\'').and_then(|x| x.strip_suffix('\'')))
                        .unwrap_or(v);
                    (n.trim(), Some(unquoted.to_string()))
                }
                None => (body.trim(), None),
            };
            if name.is_empty() || !name.chars().all(is_ident) {
                return Err(err("bad attribute name"));
            }
            sel.attrs.push((name.to_ascii_lowercase(), value));
        }
        if !rest.is_empty() {
            return Err(err("unsupported syntax"));
        }
        if sel.tag.is_none() && sel.id.is_none() && sel.attrs.is_empty() {
            return Err(err("empty selector"));
        }
        Ok(sel)
    }
}

impl TryFrom<String> for Selector {
    type Error = SelectorError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Selector> for String {
    fn from(s: Selector) -> String {
        s.to_string()
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = &self.tag {
            f.write_str(t)?;
        }
        if let Some(id) = &self.id {
            write!(f, "#{id}")?;
        }
        for (n, v) in &self.attrs {
            match v {
                Some(v) => write!(f, "[{n}=\"{v}\"]")?,
                None => write!(f, "[{n}]")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_html;

    #[test]
    fn parses_forms() {
        let s: Selector = "button#menu-soccer[aria-expanded=\"false\"]"
            .parse()
            .unwrap();
        assert_eq!(s.tag.as_deref(), Some("button"));
        assert_eq!(s.id.as_deref(), Some("menu-soccer"));
        assert_eq!(
            s.attrs,
            [("aria-expanded".to_string(), Some("false".to_string()))]
        );
        assert_eq!(s.to_string().parse::<Selector>().unwrap(), s);
        let s: Selector = "[role=option]".parse().unwrap();
        assert_eq!(s.tag, None);
        assert!("#".parse::<Selector>().is_err());
        assert!("div > p".parse::<Selector>().is_err());
        assert!("".parse::<Selector>().is_err());
    }

    #[test]
    fn finds_first_match() {
        let snap = parse_html(
            r#"<li role="option">a</li><li role="option" id="b">b</li><input disabled>"#,
            "https://x.test/",
        )
        .unwrap();
        let path = "li[role=option]"
            .parse::<Selector>()
            .unwrap()
            .find(&snap)
            .unwrap();
        assert_eq!(snap.node_at(&path).unwrap().text_content(), "a");
        assert!("li#b".parse::<Selector>().unwrap().find(&snap).is_some());
        assert!("input[disabled]"
            .parse::<Selector>()
            .unwrap()
            .find(&snap)
            .is_some());
        assert!("li#c".parse::<Selector>().unwrap().find(&snap).is_none());
    }
}
