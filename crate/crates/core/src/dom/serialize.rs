use super::{DomNode, DomSnapshot, NodeKind, MMID_ATTRIBUTE};

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "basefont", "bgsound", "br", "col", "embed", "frame", "hr", "img", "input",
    "keygen", "link", "meta", "param", "source", "track", "wbr",
];

const RAW_TEXT_ELEMENTS: &[&str] = &[
    "script",
    "style",
    "xmp",
    "iframe",
    "noembed",
    "noframes",
    "plaintext",
    "noscript",
];

pub(crate) fn is_void(tag: &str) -> bool {
    VOID_ELEMENTS.contains(&tag)
}

/// Canonical full serialization: every tag, attribute and text node, with
/// assigned mmids emitted as `mmid` attributes.
///
/// Output re-parses to the same tree, so one parse/serialize round trip
/// reaches a fixed point.
pub fn serialize_raw(snapshot: &DomSnapshot) -> String {
    let mut out = String::new();
    write_node(snapshot.root(), None, &mut out);
    out
}

fn write_node(node: &DomNode, parent_tag: Option<&str>, out: &mut String) {
    match node.kind() {
        NodeKind::Text => {
            if parent_tag.is_some_and(|t| RAW_TEXT_ELEMENTS.contains(&t)) {
                out.push_str(node.text());
            } else {
                escape_text(node.text(), out);
            }
        }
        NodeKind::Comment => {
            out.push_str("<!--");
            out.push_str(node.text());
            out.push_str("-->");
        }
        NodeKind::Element => {
            let tag = node.tag();
            out.push('<');
            out.push_str(tag);
            for (k, v) in node.attributes().iter() {
                if k == MMID_ATTRIBUTE {
                    continue;
                }
                out.push(' ');
                out.push_str(k);
                out.push_str("=\"");
                escape_attr(v, out);
                out.push('"');
            }
            if let Some(m) = node.mmid() {
                out.push_str(&format!(" {MMID_ATTRIBUTE}=\"{m}\""));
            }
            out.push('>');
            if is_void(tag) {
                return;
            }
            // The parser drops one newline right after these start tags.
            if matches!(tag, "pre" | "textarea" | "listing") {
                if let Some(first) = node.children().first() {
                    if first.is_text() && first.text().starts_with('\n') {
                        out.push('\n');
                    }
                }
            }
            for c in node.children() {
                write_node(c, Some(tag), out);
            }
            out.push_str("</");
            out.push_str(tag);
            out.push('>');
        }
    }
}

fn escape_text(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_html;

    fn canon(html: &str) -> String {
        serialize_raw(&parse_html(html, "https://x.test/").unwrap())
    }

    #[test]
    fn paragraph_canonical_form() {
        assert_eq!(
            canon("<p>hi</p>"),
            "<html><head></head><body><p>hi</p></body></html>"
        );
    }

    #[test]
    fn escapes_text_and_attributes() {
        let out = canon(r#"<a title="a&quot;b">1 &lt; 2 &amp; 3</a>"#);
        assert!(out.contains(r#"title="a&quot;b""#));
        assert!(out.contains("1 &lt; 2 &amp; 3"));
    }

    #[test]
    fn raw_text_is_not_escaped() {
        let out = canon("<script>if (a < b && c) {}</script>");
        assert!(out.contains("if (a < b && c) {}"));
    }

    #[test]
    fn fixpoint_on_messy_markup() {
        let samples = [
            "<p>a<div>b</div>c",
            "<table>x<tr><td>1<td>2</table>",
            "<b><i>x</b>y</i>",
            "<pre>\n\nindented</pre>",
            "<textarea>\nv</textarea><select><option>a<option>b</select>",
            "<ul><li>1<li>2</ul><br/><img src=x>",
            "text before<html><body>after</body></html>trailing",
        ];
        for s in samples {
            let once = canon(s);
            assert_eq!(canon(&once), once, "input {s:?}");
        }
    }
}
