//! Contract with the in-page instrumentation script, and the page
//! expressions the adapter evaluates.
//!
//! The script is registered to run at every document start. It must define
//! one global, [`GLOBAL`], with:
//!
//! * `beginEpoch()`: clears the buffer, bumps the epoch and returns it.
//! * `readMutations(epoch)`: if `epoch` is current, returns and clears
//!   `{epoch, entries}`; otherwise `{error: "epoch_mismatch", expected}`.
//! * `injectMmids()` (optional): annotates eligible elements above the
//!   high-water mark and returns how many it annotated.
//!
//! Entries follow [`MutationEntry`]. Mutations of the `mmid` attribute
//! itself are not recorded and the script never throws into the page.
//!
//! Every expression starts with a `/*webnav:NAME*/` marker line and, when
//! it takes arguments, ends with a line holding the argument JSON.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Name of the global the instrumentation script defines.
pub const GLOBAL: &str = "__webnav";

/// Attribute carrying each element's document-order index in a serialized
/// clone. Removed before the adapter's parse is exposed.
pub const INDEX_ATTRIBUTE: &str = "data-webnav-ix";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstrumentationError {
    #[error("mutation buffer epoch {requested} is stale; page is at {expected}")]
    EpochMismatch { requested: u64, expected: u64 },
    #[error("instrumentation global {GLOBAL} is not installed")]
    Missing,
    #[error("malformed instrumentation reply: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationType {
    Added,
    Removed,
    Attribute,
    Text,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationEntry {
    #[serde(rename = "type")]
    pub kind: MutationType,
    /// Child-node indices from `document.documentElement`.
    pub target: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new: Option<String>,
}

/// Entries observed during one epoch, in observation order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationBuffer {
    pub epoch: u64,
    pub entries: Vec<MutationEntry>,
}

/// Where an action target sits and whether it can take the action.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct TargetInfo {
    pub found: bool,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub visible: bool,
    #[serde(default)]
    pub disabled: bool,
    #[serde(default)]
    pub editable: bool,
}

/// Serialized page as returned by [`serialize_expression`].
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct PageSource {
    pub url: String,
    pub html: String,
}

fn marked(name: &str, body: &str, args: Option<Value>) -> String {
    match args {
        Some(a) => format!("/*webnav:{name}*/\n({body})\n({a})"),
        None => format!("/*webnav:{name}*/\n({body})()"),
    }
}

const ELEMENT_LIST: &str = "const list = (root) => { const out = []; \
const w = document.createTreeWalker(root, NodeFilter.SHOW_ELEMENT); \
for (let n = w.currentNode; n; n = w.nextNode()) out.push(n); return out; };";

/// Clones the document, copies live form state onto the clone as
/// attributes, tags every element with [`INDEX_ATTRIBUTE`] and returns
/// `{url, html}`.
pub fn serialize_expression() -> String {
    let body = format!(
        "() => {{ {ELEMENT_LIST}
  const root = document.documentElement;
  const live = list(root);
  const clone = root.cloneNode(true);
  list(clone).forEach((c, i) => {{
    const l = live[i];
    c.setAttribute('{INDEX_ATTRIBUTE}', String(i));
    if (l instanceof HTMLInputElement) {{
      if (l.type === 'checkbox' || l.type === 'radio') {{
        if (l.checked) c.setAttribute('checked', ''); else c.removeAttribute('checked');
      }} else if (l.type !== 'file') c.setAttribute('value', l.value);
    }} else if (l instanceof HTMLTextAreaElement) c.textContent = l.value;
    else if (l instanceof HTMLOptionElement) {{
      if (l.selected) c.setAttribute('selected', ''); else c.removeAttribute('selected');
    }}
  }});
  return {{ url: location.href, html: '<!DOCTYPE html>' + clone.outerHTML }};
}}"
    );
    marked("serialize", &body, None)
}

/// Sets `mmid` on the live elements named by `[index, tag, mmid]` triples
/// and removes it from every other element. Returns `{marked, skipped}`.
pub fn mark_expression(pairs: &[(usize, String, u32)]) -> String {
    let body = format!(
        "(pairs) => {{ {ELEMENT_LIST}
  const live = list(document.documentElement);
  const want = new Map();
  let skipped = 0;
  for (const [ix, tag, mmid] of pairs) {{
    const el = live[ix];
    if (el && el.localName.toLowerCase() === tag) want.set(el, String(mmid)); else skipped++;
  }}
  for (const el of live) {{
    const v = want.get(el);
    if (v === undefined) {{ if (el.hasAttribute('mmid')) el.removeAttribute('mmid'); }}
    else if (el.getAttribute('mmid') !== v) el.setAttribute('mmid', v);
  }}
  return {{ marked: want.size, skipped }};
}}"
    );
    let triples: Vec<Value> = pairs.iter().map(|(i, t, m)| json!([i, t, m])).collect();
    marked("mark", &body, Some(Value::Array(triples)))
}

/// Scrolls the element with `mmid` into view and reports a [`TargetInfo`].
pub fn target_expression(mmid: u32) -> String {
    let body = "(a) => {
  const el = document.querySelector(`[mmid=\"${a.mmid}\"]`);
  if (!el) return { found: false };
  el.scrollIntoView({ block: 'center', inline: 'center' });
  const r = el.getBoundingClientRect();
  const s = getComputedStyle(el);
  const visible = r.width > 0 && r.height > 0 && s.visibility !== 'hidden' && s.display !== 'none';
  const disabled = !!el.disabled || el.getAttribute('aria-disabled') === 'true';
  const fixed = ['button', 'submit', 'reset', 'checkbox', 'radio', 'image', 'file', 'hidden', 'range', 'color'];
  const editable = !el.readOnly && (el.isContentEditable || el instanceof HTMLTextAreaElement
    || (el instanceof HTMLInputElement && !fixed.includes(el.type)));
  return { found: true, x: r.left + r.width / 2, y: r.top + r.height / 2, visible, disabled, editable };
}";
    marked("target", body, Some(json!({ "mmid": mmid })))
}

/// Focuses the element with `mmid`, optionally clearing its text first.
/// Returns whether the element exists.
pub fn focus_expression(mmid: u32, clear: bool) -> String {
    let body = "(a) => {
  const el = document.querySelector(`[mmid=\"${a.mmid}\"]`);
  if (!el) return false;
  el.focus();
  if (a.clear) {
    if ('value' in el) { el.value = ''; el.dispatchEvent(new Event('input', { bubbles: true })); }
    else if (el.isContentEditable) el.textContent = '';
  }
  return true;
}";
    marked("focus", body, Some(json!({ "mmid": mmid, "clear": clear })))
}

fn global_call(name: &str, call: &str, args: Option<Value>) -> String {
    let body = format!(
        "(a) => {{ const g = window.{GLOBAL}; \
return g && typeof g.{call} === 'function' ? g.{call}(a) : null; }}"
    );
    marked(name, &body, Some(args.unwrap_or(Value::Null)))
}

pub fn begin_epoch_expression() -> String {
    global_call("epoch", "beginEpoch", None)
}

pub fn read_mutations_expression(epoch: u64) -> String {
    global_call("read", "readMutations", Some(json!(epoch)))
}

pub fn inject_expression() -> String {
    global_call("inject", "injectMmids", None)
}

/// Name in an expression's marker line.
pub fn expression_name(expression: &str) -> Option<&str> {
    expression
        .strip_prefix("/*webnav:")?
        .split_once("*/")
        .map(|(n, _)| n)
}

/// Argument JSON from the last line of an expression.
pub fn expression_args(expression: &str) -> Option<Value> {
    let last = expression.lines().last()?;
    serde_json::from_str(last.strip_prefix('(')?.strip_suffix(')')?).ok()
}

fn missing_to_none(value: &Value) -> Option<&Value> {
    (!value.is_null()).then_some(value)
}

pub fn parse_epoch_reply(value: &Value) -> Result<u64, InstrumentationError> {
    let v = missing_to_none(value).ok_or(InstrumentationError::Missing)?;
    v.as_u64()
        .ok_or_else(|| InstrumentationError::Malformed(format!("epoch {v}")))
}

pub fn parse_inject_reply(value: &Value) -> Result<u32, InstrumentationError> {
    let v = missing_to_none(value).ok_or(InstrumentationError::Missing)?;
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| InstrumentationError::Malformed(format!("inject count {v}")))
}

pub fn parse_read_reply(
    requested: u64,
    value: &Value,
) -> Result<MutationBuffer, InstrumentationError> {
    let v = missing_to_none(value).ok_or(InstrumentationError::Missing)?;
    if v.get("error").and_then(Value::as_str) == Some("epoch_mismatch") {
        let expected = v
            .get("expected")
            .and_then(Value::as_u64)
            .ok_or_else(|| InstrumentationError::Malformed(v.to_string()))?;
        return Err(InstrumentationError::EpochMismatch {
            requested,
            expected,
        });
    }
    let buffer: MutationBuffer = serde_json::from_value(v.clone())
        .map_err(|e| InstrumentationError::Malformed(e.to_string()))?;
    if buffer.epoch != requested {
        return Err(InstrumentationError::EpochMismatch {
            requested,
            expected: buffer.epoch,
        });
    }
    Ok(buffer)
}
