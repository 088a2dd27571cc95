//! Generators, oracles and scripted scenarios shared by the integration
//! tests and the acceptance binary.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde_json::json;

use webnav::agents::{run_task, AgentConfig, Runtime, TaskOutcome};
use webnav::change::{AttributeWatchlist, ChangeDetail, ChangeKind, ChangeObservation};
use webnav::distill::{distill, ContentType, DistilledElement, DistilledView, ViewBody};
use webnav::dom::{parse_instrumented_html, DomNode, DomSnapshot};
use webnav::harness::{FailureKind, GroupMetrics, TaskRecord, OVERALL};
use webnav::llm::{ChatBackend, ChatResponse, LlmGateway, ScriptEntry, ScriptOutcome};
use webnav::sim::{SimSite, SimSiteSpec};
use webnav::skills::{BrowserSession, SkillSet, UrlGuard};
use webnav::trace::{Trace, TraceEvent};

const WORDS: &[&str] = &[
    "alpha", "river", "stone", "cloud", "ember", "north", "quiet", "maple", "orbit", "delta",
    "lumen", "cedar", "Zürich", "naïve", "東京", "x",
];

fn words(rng: &mut ChaCha8Rng, max: usize) -> String {
    let n = rng.gen_range(1..=max);
    (0..n)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------------------
// Distillation fixtures and oracles

pub const SCRIPT_MARKER: &str = "scriptmarker";
pub const STYLE_MARKER: &str = "stylemarker";
pub const COMMENT_MARKER: &str = "commentmarker";
pub const HIDDEN_MARKER: &str = "hiddenmarker";

/// Attribute whitelist as documented, kept separate from the library table.
pub const DOCUMENTED_WHITELIST: &[&str] = &[
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

fn junk_attrs(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    if rng.gen_bool(0.5) {
        let _ = write!(s, " class=\"px-{} flex md:grid\"", rng.gen_range(0..9));
    }
    if rng.gen_bool(0.3) {
        let _ = write!(s, " data-track=\"t{}\"", rng.gen_range(0..999));
    }
    if rng.gen_bool(0.15) {
        s.push_str(" style=\"color: red\"");
    }
    if rng.gen_bool(0.1) {
        s.push_str(" aria-describedby=\"tip\"");
    }
    s
}

fn hiding_attr(rng: &mut ChaCha8Rng) -> &'static str {
    match rng.gen_range(0..5) {
        0 => " hidden",
        1 => " aria-hidden=\"true\"",
        2 => " style=\"display: none\"",
        3 => " style=\"VISIBILITY:hidden;color:red\"",
        _ => " style=\"display:none !important\"",
    }
}

fn lattice_node(rng: &mut ChaCha8Rng, depth: usize, out: &mut String) {
    let j = junk_attrs(rng);
    let pick = if depth >= 5 {
        rng.gen_range(0..16)
    } else {
        rng.gen_range(0..22)
    };
    match pick {
        0 | 1 => out.push_str(&words(rng, 5)),
        2 => {
            let _ = write!(out, "<span{j}>{}</span>", words(rng, 3));
        }
        3 => {
            let level = rng.gen_range(1..=3);
            let _ = write!(out, "<h{level}{j}>{}</h{level}>", words(rng, 3));
        }
        4 => {
            let path = if rng.gen_bool(0.2) {
                "q".repeat(rng.gen_range(100..300))
            } else {
                format!("p{}", rng.gen_range(0..99))
            };
            let _ = write!(
                out,
                "<a href=\"https://gen.test/{path}\"{j}>{}</a>",
                words(rng, 3)
            );
        }
        5 => {
            let extra = if rng.gen_bool(0.3) {
                " onclick=\"go()\""
            } else {
                ""
            };
            let _ = write!(out, "<button{j}{extra}>{}</button>", words(rng, 2));
        }
        6 => {
            let ty =
                ["text", "search", "checkbox", "hidden", "submit", "email"][rng.gen_range(0..6)];
            let _ = write!(
                out,
                "<input type=\"{ty}\" name=\"f{}\" placeholder=\"{}\" value=\"v{}\"{j}>",
                rng.gen_range(0..99),
                words(rng, 2),
                rng.gen_range(0..9)
            );
        }
        7 => {
            let _ = write!(
                out,
                "<label{j}>{} <input name=\"l{}\"></label>",
                words(rng, 2),
                rng.gen_range(0..99)
            );
        }
        8 => {
            out.push_str("<select name=\"s\">");
            for i in 0..rng.gen_range(1..4) {
                let _ = write!(out, "<option value=\"{i}\">{}</option>", words(rng, 2));
            }
            out.push_str("</select>");
        }
        9 => {
            let _ = write!(out, "<textarea name=\"t\">{}</textarea>", words(rng, 3));
        }
        10 => {
            let _ = write!(out, "<img alt=\"{}\" src=\"/i.png\"{j}>", words(rng, 2));
        }
        11 => {
            let _ = write!(out, "<script>var {SCRIPT_MARKER} = 1;</script>");
        }
        12 => {
            let _ = write!(out, "<style>.{STYLE_MARKER} {{ color: red }}</style>");
        }
        13 => {
            let _ = write!(out, "<!-- {COMMENT_MARKER} -->");
        }
        14 => {
            let role =
                ["button", "tab", "menuitem", "option", "combobox", "link"][rng.gen_range(0..6)];
            let _ = write!(
                out,
                "<div role=\"{role}\" tabindex=\"0\" aria-expanded=\"false\"{j}>{}</div>",
                words(rng, 2)
            );
        }
        15 => {
            let h = hiding_attr(rng);
            let _ = write!(
                out,
                "<div{h}>{HIDDEN_MARKER} <button>{HIDDEN_MARKER}</button></div>"
            );
        }
        _ => {
            let tag = [
                "div", "section", "nav", "form", "fieldset", "main", "header", "footer", "aside",
                "p", "ul",
            ][rng.gen_range(0..11)];
            let role = match rng.gen_range(0..6) {
                0 => " role=\"menu\"",
                1 => " aria-label=\"Region\"",
                _ => "",
            };
            let _ = write!(out, "<{tag}{role}{j}>");
            if tag == "fieldset" && rng.gen_bool(0.5) {
                let _ = write!(out, "<legend>{}</legend>", words(rng, 2));
            }
            for _ in 0..rng.gen_range(1..5) {
                if tag == "ul" {
                    out.push_str("<li>");
                    lattice_node(rng, depth + 1, out);
                    out.push_str("</li>");
                } else {
                    lattice_node(rng, depth + 1, out);
                }
            }
            let _ = write!(out, "</{tag}>");
        }
    }
}

/// A random page mixing widgets, noise and hidden content.
pub fn lattice_page(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("<!DOCTYPE html><html><head><title>Generated</title>");
    let _ = write!(out, "<script>{SCRIPT_MARKER}()</script></head><body>");
    for _ in 0..rng.gen_range(3..12) {
        lattice_node(&mut rng, 0, &mut out);
    }
    out.push_str("</body></html>");
    out
}

pub fn lattice_snapshot(seed: u64) -> DomSnapshot {
    let html = lattice_page(seed);
    let url = format!("https://gen.test/{seed}");
    webnav::dom::assign_mmids(
        webnav::dom::parse_html(&html, &url).expect("parser is total"),
        webnav::dom::MmidPolicy::AllElements,
    )
}

const ORACLE_SKIPPED_TAGS: &[&str] = &[
    "script", "style", "noscript", "template", "head", "title", "meta",
];

fn oracle_hidden(node: &DomNode) -> bool {
    let a = |k: &str| node.attr(k);
    if a("hidden").is_some()
        || a("aria-hidden").is_some_and(|v| v.trim().eq_ignore_ascii_case("true"))
    {
        return true;
    }
    if node.tag() == "input" && a("type").is_some_and(|t| t.trim().eq_ignore_ascii_case("hidden")) {
        return true;
    }
    let style: String = a("style")
        .unwrap_or("")
        .split_whitespace()
        .collect::<String>()
        .to_lowercase();
    style.contains("display:none") || style.contains("visibility:hidden")
}

/// Every text node not under a skipped or hidden element, whitespace
/// collapsed, empty ones dropped.
pub fn oracle_visible_texts(root: &DomNode) -> Vec<String> {
    fn go(n: &DomNode, out: &mut Vec<String>) {
        if n.is_text() {
            let t = n.text().split_whitespace().collect::<Vec<_>>().join(" ");
            if !t.is_empty() {
                out.push(t);
            }
            return;
        }
        if !n.is_element() || ORACLE_SKIPPED_TAGS.contains(&n.tag()) || oracle_hidden(n) {
            return;
        }
        n.children().iter().for_each(|c| go(c, out));
    }
    let mut out = Vec::new();
    go(root, &mut out);
    out
}

fn rendered_attribute_names(rendered: &str) -> Vec<String> {
    let re = Regex::new(r#" ([a-zA-Z][a-zA-Z0-9:@._-]*)="#).expect("valid");
    re.captures_iter(rendered)
        .map(|c| c[1].to_string())
        .collect()
}

/// Checks the three lattice properties on one snapshot.
pub fn check_lattice(snap: &DomSnapshot) -> Result<(), String> {
    let inputs = distill(snap, ContentType::InputFields).map_err(|e| e.to_string())?;
    let all = distill(snap, ContentType::AllFields).map_err(|e| e.to_string())?;
    let text = distill(snap, ContentType::TextOnly).map_err(|e| e.to_string())?;
    if !inputs.mmids().is_subset(&all.mmids()) {
        let extra: Vec<_> = inputs.mmids().difference(&all.mmids()).copied().collect();
        return Err(format!("input_fields mmids not in all_fields: {extra:?}"));
    }
    let rendered_text = text.render();
    for t in oracle_visible_texts(snap.root()) {
        if !rendered_text.contains(&t) {
            return Err(format!("visible text {t:?} missing from text_only"));
        }
    }
    for marker in [SCRIPT_MARKER, STYLE_MARKER, COMMENT_MARKER, HIDDEN_MARKER] {
        if rendered_text.contains(marker) {
            return Err(format!("{marker} leaked into text_only"));
        }
    }
    for view in [&inputs, &all] {
        for el in view.elements() {
            for (k, v) in &el.kept_attributes {
                if !DOCUMENTED_WHITELIST.contains(&k.as_str()) {
                    return Err(format!("attribute {k} kept on [{}]", el.mmid));
                }
                if k == "href" && v.chars().count() > 128 {
                    return Err(format!("href of [{}] longer than 128", el.mmid));
                }
            }
        }
        let rendered = view.render();
        for name in rendered_attribute_names(&rendered) {
            if !DOCUMENTED_WHITELIST.contains(&name.as_str()) {
                return Err(format!(
                    "attribute {name} rendered in {:?}",
                    view.content_type
                ));
            }
        }
        for marker in [SCRIPT_MARKER, STYLE_MARKER, COMMENT_MARKER] {
            if rendered.contains(marker) {
                return Err(format!("{marker} leaked into {:?}", view.content_type));
            }
        }
    }
    Ok(())
}

/// Exhaustive check that distilled ancestry implies DOM ancestry. Returns
/// the number of pairs checked.
pub fn check_structure(snap: &DomSnapshot, view: &DistilledView) -> Result<usize, String> {
    fn pairs<'a>(
        el: &'a DistilledElement,
        chain: &mut Vec<&'a DistilledElement>,
        out: &mut Vec<(&'a DistilledElement, &'a DistilledElement)>,
    ) {
        out.extend(chain.iter().map(|a| (*a, el)));
        chain.push(el);
        for c in &el.children {
            pairs(c, chain, out);
        }
        chain.pop();
    }
    let ViewBody::Elements(forest) = &view.body else {
        return Err("structure check needs an element view".into());
    };
    let mut all = Vec::new();
    for root in forest {
        pairs(root, &mut Vec::new(), &mut all);
    }
    for (a, d) in &all {
        let pa = snap
            .path_of(a.mmid)
            .ok_or_else(|| format!("[{}] not in snapshot", a.mmid))?;
        let pd = snap
            .path_of(d.mmid)
            .ok_or_else(|| format!("[{}] not in snapshot", d.mmid))?;
        if !pa.is_ancestor_of(pd) {
            return Err(format!(
                "[{}] shown above [{}] but is not its DOM ancestor",
                a.mmid, d.mmid
            ));
        }
    }
    Ok(all.len())
}

// ---------------------------------------------------------------------------
// Change observation: tree model, single mutations, brute-force diff

/// Watchlist as documented.
pub const DOCUMENTED_WATCHLIST: &[&str] = &[
    "aria-expanded",
    "aria-selected",
    "aria-hidden",
    "open",
    "value",
    "checked",
    "disabled",
    "class",
];

pub fn documented_watchlist() -> AttributeWatchlist {
    AttributeWatchlist::new(DOCUMENTED_WATCHLIST.iter().copied()).expect("non-empty")
}

const CONTAINERS: &[&str] = &["div", "section", "nav", "span"];
const LEAVES: &[&str] = &["button", "a", "input"];

#[derive(Clone, Debug, PartialEq)]
pub struct MNode {
    pub tag: &'static str,
    pub mmid: Option<u32>,
    pub attrs: Vec<(String, String)>,
    pub text: String,
    pub children: Vec<MNode>,
}

impl MNode {
    fn new(tag: &'static str, mmid: Option<u32>) -> Self {
        Self {
            tag,
            mmid,
            attrs: Vec::new(),
            text: String::new(),
            children: Vec::new(),
        }
    }

    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    fn set_attr(&mut self, name: &str, value: Option<String>) {
        self.attrs.retain(|(k, _)| k != name);
        if let Some(v) = value {
            self.attrs.push((name.to_string(), v));
        }
    }

    fn is_leaf(&self) -> bool {
        LEAVES.contains(&self.tag)
    }

    fn at_mut(&mut self, path: &[usize]) -> &mut MNode {
        path.iter().fold(self, |n, &i| &mut n.children[i])
    }

    fn render(&self, out: &mut String) {
        let _ = write!(out, "<{}", self.tag);
        if let Some(m) = self.mmid {
            let _ = write!(out, " mmid=\"{m}\"");
        }
        for (k, v) in &self.attrs {
            let _ = write!(out, " {k}=\"{v}\"");
        }
        out.push('>');
        if self.tag == "input" {
            return;
        }
        out.push_str(&self.text);
        for c in &self.children {
            c.render(out);
        }
        let _ = write!(out, "</{}>", self.tag);
    }
}

#[derive(Clone, Debug)]
pub struct PageModel {
    pub url: String,
    pub root: MNode,
    next_mmid: u32,
}

impl PageModel {
    pub fn to_snapshot(&self) -> DomSnapshot {
        let mut html = String::from("<!DOCTYPE html>");
        self.root.render(&mut html);
        parse_instrumented_html(&html, &self.url).expect("parser is total")
    }

    fn fresh_mmid(&mut self, rng: &mut ChaCha8Rng) -> Option<u32> {
        rng.gen_bool(0.8).then(|| {
            self.next_mmid += 1;
            self.next_mmid
        })
    }

    fn random_element(&mut self, rng: &mut ChaCha8Rng, depth: usize, budget: &mut usize) -> MNode {
        let container = depth < 4 && *budget > 1 && rng.gen_bool(0.5);
        let tag = if container {
            CONTAINERS[rng.gen_range(0..CONTAINERS.len())]
        } else {
            LEAVES[rng.gen_range(0..LEAVES.len())]
        };
        let mut n = MNode::new(tag, self.fresh_mmid(rng));
        *budget = budget.saturating_sub(1);
        if tag == "a" {
            n.attrs
                .push(("href".into(), format!("/p{}", rng.gen_range(0..50))));
        }
        for name in ["class", "aria-expanded", "value", "data-x"] {
            if rng.gen_bool(0.25) {
                n.attrs
                    .push((name.into(), format!("v{}", rng.gen_range(0..4))));
            }
        }
        if tag != "input" && rng.gen_bool(0.6) {
            n.text = words(rng, 3);
        }
        if container {
            for _ in 0..rng.gen_range(1..4) {
                if *budget == 0 {
                    break;
                }
                let child = self.random_element(rng, depth + 1, budget);
                n.children.push(child);
            }
        }
        n
    }

    /// `html > head + body > random elements`; html, head and body carry
    /// mmids 1, 2 and 3.
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut model = PageModel {
            url: "https://model.test/".into(),
            root: MNode::new("html", Some(1)),
            next_mmid: 3,
        };
        let mut body = MNode::new("body", Some(3));
        let mut budget = rng.gen_range(5..40);
        while budget > 0 {
            let el = model.random_element(rng, 0, &mut budget);
            body.children.push(el);
        }
        model.root.children = vec![MNode::new("head", Some(2)), body];
        model
    }

    fn element_paths(&self) -> Vec<Vec<usize>> {
        fn go(n: &MNode, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(path.clone());
            for (i, c) in n.children.iter().enumerate() {
                path.push(i);
                go(c, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        go(&self.root, &mut Vec::new(), &mut out);
        out
    }
}

#[derive(Clone, Debug)]
pub enum Mutation {
    Insert {
        parent: Vec<usize>,
        index: usize,
        node: MNode,
    },
    Remove(Vec<usize>),
    SetAttr {
        path: Vec<usize>,
        name: String,
        value: Option<String>,
    },
    SetText {
        path: Vec<usize>,
        text: String,
    },
    Navigate(String),
}

fn under_body(p: &[usize]) -> bool {
    p.first() == Some(&1)
}

pub fn random_mutation(model: &mut PageModel, rng: &mut ChaCha8Rng) -> Mutation {
    let paths = model.element_paths();
    let body_paths: Vec<&Vec<usize>> = paths.iter().filter(|p| under_body(p)).collect();
    loop {
        match rng.gen_range(0..20) {
            0 => {
                return Mutation::Navigate(format!(
                    "https://model.test/next{}",
                    rng.gen_range(0..9)
                ))
            }
            1..=5 => {
                let parents: Vec<&&Vec<usize>> = body_paths
                    .iter()
                    .filter(|p| !model.root.at_mut(p).is_leaf())
                    .collect();
                let parent = (*parents[rng.gen_range(0..parents.len())]).clone();
                let max = model.root.at_mut(&parent).children.len();
                let mut budget = rng.gen_range(1..14);
                let node = model.random_element(rng, 1, &mut budget);
                return Mutation::Insert {
                    parent,
                    index: rng.gen_range(0..=max),
                    node,
                };
            }
            6..=9 => {
                let removable: Vec<&&Vec<usize>> =
                    body_paths.iter().filter(|p| p.len() > 1).collect();
                if removable.is_empty() {
                    continue;
                }
                return Mutation::Remove((*removable[rng.gen_range(0..removable.len())]).clone());
            }
            10..=16 => {
                let path = body_paths[rng.gen_range(0..body_paths.len())].clone();
                let names = [
                    "aria-expanded",
                    "class",
                    "value",
                    "checked",
                    "open",
                    "data-x",
                    "title",
                    "aria-hidden",
                ];
                let name = names[rng.gen_range(0..names.len())].to_string();
                let value = rng
                    .gen_bool(0.8)
                    .then(|| format!("v{}", rng.gen_range(0..4)));
                return Mutation::SetAttr { path, name, value };
            }
            _ => {
                let path = body_paths[rng.gen_range(0..body_paths.len())].clone();
                if model.root.at_mut(&path).tag == "input" {
                    continue;
                }
                let text = if rng.gen_bool(0.2) {
                    String::new()
                } else {
                    words(rng, 3)
                };
                return Mutation::SetText { path, text };
            }
        }
    }
}

pub fn apply_mutation(model: &PageModel, m: &Mutation) -> PageModel {
    let mut out = model.clone();
    match m {
        Mutation::Insert {
            parent,
            index,
            node,
        } => out
            .root
            .at_mut(parent)
            .children
            .insert(*index, node.clone()),
        Mutation::Remove(path) => {
            let (last, parent) = path.split_last().expect("non-root");
            out.root.at_mut(parent).children.remove(*last);
        }
        Mutation::SetAttr { path, name, value } => {
            out.root.at_mut(path).set_attr(name, value.clone())
        }
        Mutation::SetText { path, text } => out.root.at_mut(path).text = text.clone(),
        Mutation::Navigate(url) => out.url = url.clone(),
    }
    out
}

/// Comparable projection of one change record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Proj {
    Subtree {
        kind: ChangeKind,
        mmid: Option<u32>,
        locator: String,
        elements: usize,
        interactive: Vec<Option<u32>>,
        overflow: usize,
    },
    Attr {
        mmid: Option<u32>,
        locator: String,
        name: String,
        old: Option<String>,
        new: Option<String>,
    },
    Text {
        mmid: Option<u32>,
        locator: String,
        old: String,
        new: String,
    },
    Nav {
        from: String,
        to: String,
    },
}

pub fn project(obs: &ChangeObservation) -> Vec<Proj> {
    obs.records
        .iter()
        .map(|r| {
            let mmid = r.mmid.map(|m| m.get());
            match &r.detail {
                ChangeDetail::Subtree(s) => Proj::Subtree {
                    kind: r.kind,
                    mmid,
                    locator: r.locator.clone(),
                    elements: s.element_count,
                    interactive: s
                        .interactive
                        .iter()
                        .map(|d| d.mmid.map(|m| m.get()))
                        .collect(),
                    overflow: s.overflow,
                },
                ChangeDetail::Attribute { name, old, new } => Proj::Attr {
                    mmid,
                    locator: r.locator.clone(),
                    name: name.clone(),
                    old: old.clone(),
                    new: new.clone(),
                },
                ChangeDetail::Text { old, new } => Proj::Text {
                    mmid,
                    locator: r.locator.clone(),
                    old: old.clone(),
                    new: new.clone(),
                },
                ChangeDetail::Navigation { from, to } => Proj::Nav {
                    from: from.clone(),
                    to: to.clone(),
                },
            }
        })
        .collect()
}

struct Flat<'a> {
    node: &'a MNode,
    path: Vec<usize>,
    parent: Option<usize>,
    locator: String,
}

fn flatten(root: &MNode) -> Vec<Flat<'_>> {
    fn go<'a>(
        n: &'a MNode,
        path: Vec<usize>,
        parent: Option<usize>,
        locator: String,
        out: &mut Vec<Flat<'a>>,
    ) {
        let me = out.len();
        out.push(Flat {
            node: n,
            path: path.clone(),
            parent,
            locator: locator.clone(),
        });
        for (i, c) in n.children.iter().enumerate() {
            let mut p = path.clone();
            p.push(i);
            go(c, p, Some(me), format!("{locator}/{}[{i}]", c.tag), out);
        }
    }
    let mut out = Vec::new();
    go(root, Vec::new(), None, root.tag.to_string(), &mut out);
    out
}

fn same_identity(a: &Flat<'_>, b: &Flat<'_>) -> bool {
    match (a.node.mmid, b.node.mmid) {
        (Some(x), Some(y)) => x == y,
        (None, None) => a.node.tag == b.node.tag && a.path == b.path,
        _ => false,
    }
}

fn find_match(x: &Flat<'_>, other: &[Flat<'_>]) -> Option<usize> {
    other.iter().position(|o| same_identity(x, o))
}

fn subtree_proj(kind: ChangeKind, f: &Flat<'_>) -> Proj {
    fn all<'a>(n: &'a MNode, out: &mut Vec<&'a MNode>) {
        out.push(n);
        n.children.iter().for_each(|c| all(c, out));
    }
    let mut nodes = Vec::new();
    all(f.node, &mut nodes);
    let interactive: Vec<Option<u32>> = nodes
        .iter()
        .filter(|n| {
            matches!(n.tag, "button" | "input") || (n.tag == "a" && n.attr("href").is_some())
        })
        .map(|n| n.mmid)
        .collect();
    Proj::Subtree {
        kind,
        mmid: f.node.mmid,
        locator: f.locator.clone(),
        elements: nodes.len(),
        overflow: interactive.len().saturating_sub(10),
        interactive: interactive.into_iter().take(10).collect(),
    }
}

/// Quadratic reference diff over the models.
pub fn brute_force_diff(pre: &PageModel, post: &PageModel) -> Vec<Proj> {
    if pre.url != post.url {
        return vec![Proj::Nav {
            from: pre.url.clone(),
            to: post.url.clone(),
        }];
    }
    let a = flatten(&pre.root);
    let b = flatten(&post.root);
    let mut out = Vec::new();
    for f in &b {
        match find_match(f, &a) {
            None => {
                if f.parent.is_none_or(|p| find_match(&b[p], &a).is_some()) {
                    out.push(subtree_proj(ChangeKind::NodesAdded, f));
                }
            }
            Some(j) => {
                let old = a[j].node;
                for name in DOCUMENTED_WATCHLIST {
                    let (o, n) = (old.attr(name), f.node.attr(name));
                    if o != n {
                        out.push(Proj::Attr {
                            mmid: f.node.mmid,
                            locator: f.locator.clone(),
                            name: name.to_string(),
                            old: o.map(str::to_string),
                            new: n.map(str::to_string),
                        });
                    }
                }
                let (o, n) = (old.text.trim().to_string(), f.node.text.trim().to_string());
                if o != n {
                    out.push(Proj::Text {
                        mmid: f.node.mmid,
                        locator: f.locator.clone(),
                        old: o,
                        new: n,
                    });
                }
            }
        }
    }
    for f in &a {
        if find_match(f, &b).is_none() && f.parent.is_none_or(|p| find_match(&a[p], &b).is_some()) {
            out.push(subtree_proj(ChangeKind::NodesRemoved, f));
        }
    }
    out
}

/// One random (snapshot, single mutation) case with its expected diff.
pub fn mutation_case(seed: u64) -> (DomSnapshot, DomSnapshot, Mutation, Vec<Proj>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pre = PageModel::random(&mut rng);
    let m = random_mutation(&mut pre, &mut rng);
    let post = apply_mutation(&pre, &m);
    let expected = brute_force_diff(&pre, &post);
    (pre.to_snapshot(), post.to_snapshot(), m, expected)
}

// ---------------------------------------------------------------------------
// Scripted agent scenarios

pub fn mmid_where(snap: &DomSnapshot, attr: &str, value: &str) -> u32 {
    snap.walk()
        .find(|(_, n)| n.attr(attr) == Some(value))
        .and_then(|(_, n)| n.mmid())
        .unwrap_or_else(|| panic!("no element with {attr}={value}"))
        .get()
}

pub fn start_snapshot(spec: SimSiteSpec) -> DomSnapshot {
    SimSite::new(spec)
        .expect("valid site")
        .session()
        .snapshot()
        .expect("sim snapshot")
}

/// Runs one task on a fresh session of `spec` with a zero clock.
pub fn run_on_site(
    spec: SimSiteSpec,
    task: &str,
    backend: impl ChatBackend + 'static,
    config: &AgentConfig,
) -> (TaskOutcome, Trace) {
    let site = SimSite::new(spec).expect("valid site");
    let mut session = site.session();
    let mut skills = SkillSet::new(UrlGuard::unrestricted());
    let mut gateway = LlmGateway::new(backend);
    let mut trace = Trace::with_clock(|| 0);
    let mut rt = Runtime {
        session: &mut session,
        skills: &mut skills,
        gateway: &mut gateway,
        trace: &mut trace,
    };
    let outcome = run_task("scenario", task, &mut rt, config);
    (outcome, trace)
}

pub const POPUP_TASK: &str = "List the soccer leagues offered in the Soccer menu.";

pub fn popup_script() -> Vec<ChatResponse> {
    let button = mmid_where(
        &start_snapshot(webnav::sim::fixtures::popup_menu()),
        "id",
        "menu-soccer",
    );
    vec![
        ChatResponse::text("PLAN:\n1. Open the Soccer menu and read its entries.\nNEXT: Open the Soccer menu and list the leagues it offers."),
        ChatResponse::tool_call("call-1", "click", json!({"mmid": button})),
        ChatResponse::text("The Soccer menu offers Premier League, La Liga, Serie A, Bundesliga and MLS. ##SUBTASK DONE##"),
        ChatResponse::text("##TERMINATE TASK##\nPremier League, La Liga, Serie A, Bundesliga, MLS"),
    ]
}

pub const POPUP_NAV_TURNS: usize = 2;

pub const FLIGHT_TASK: &str = "Search flights departing from Dublin.";

pub fn flight_script() -> Vec<ChatResponse> {
    let site = SimSite::new(webnav::sim::fixtures::flight_widget()).expect("valid site");
    let mut probe = site.session();
    let snap = probe.snapshot().expect("snapshot");
    let from = mmid_where(&snap, "id", "from");
    let find = mmid_where(&snap, "id", "find");
    let mut skills = SkillSet::new(UrlGuard::unrestricted());
    skills.execute(
        &mut probe,
        "enter_text",
        &json!({"mmid": from, "text": "Dub"}),
    );
    let dub = mmid_where(&probe.snapshot().expect("snapshot"), "id", "opt-dub");
    vec![
        ChatResponse::text("PLAN:\n1. Fill in the departure airport.\n2. Search.\nNEXT: Type Dub into the From field, pick Dublin and search."),
        ChatResponse::tool_call("call-1", "enter_text", json!({"mmid": from, "text": "Dub"})),
        ChatResponse::tool_call("call-2", "click", json!({"mmid": dub})),
        ChatResponse::tool_call("call-3", "click", json!({"mmid": find})),
        ChatResponse::text("Selected Dublin (DUB) and searched. ##SUBTASK DONE##"),
        ChatResponse::text("##TERMINATE TASK##\nShowing flights from Dublin (DUB)."),
    ]
}

pub const PRICING_TASK: &str = "What does the Teams plan cost?";
pub const PRICING_PLANNER_CALLS: u64 = 4;
pub const PRICING_NAVIGATOR_CALLS: u64 = 6;

pub fn pricing_script() -> Vec<ChatResponse> {
    let link = mmid_where(
        &start_snapshot(webnav::sim::fixtures::pricing_site()),
        "href",
        "https://design.test/pricing",
    );
    vec![
        ChatResponse::text(
            "PLAN:\n1. Open the pricing page.\n2. Read the Teams plan.\n3. Confirm the page.\nNEXT: Click the \"Plans and pricing\" link in the navigation bar.",
        ),
        ChatResponse::tool_call("call-1", "click", json!({"mmid": link})),
        ChatResponse::text("Opened the pricing page. ##SUBTASK DONE##"),
        ChatResponse::text("NEXT: Read the page text and report the Teams plan price."),
        ChatResponse::tool_call("call-2", "get_dom", json!({"content_type": "text_only"})),
        ChatResponse::text("Teams costs $10 per person per month with a minimum of 3 people. ##SUBTASK DONE##"),
        ChatResponse::text("VERIFY: Confirm that the current page is the pricing page."),
        ChatResponse::tool_call("call-3", "get_current_url", json!({})),
        ChatResponse::text("The current URL is https://design.test/pricing. ##SUBTASK DONE##"),
        ChatResponse::text("##TERMINATE TASK##\nThe Teams plan costs $10 per person per month, with a minimum of 3 people."),
    ]
}

/// Hierarchy invariants over one trace: the planner never sees page
/// payloads; every sub-task opens a fresh chat with one sub-task message;
/// navigator sessions never overlap.
pub fn check_hierarchy(trace: &Trace) -> Result<(), String> {
    let line = Regex::new(r"(?m)^\s*\[\d+\] [a-z0-9-]+ [a-z]+").expect("valid");
    let payloads: Vec<&str> = trace
        .events()
        .filter_map(|e| match e {
            TraceEvent::SkillResult { name, result, .. } if name == "get_dom" && result.ok => {
                Some(result.payload.as_str())
            }
            _ => None,
        })
        .filter(|p| p.chars().count() > 40)
        .collect();
    let mut open: Option<usize> = None;
    let mut expect_first = false;
    for e in trace.events() {
        match e {
            TraceEvent::PlannerRequest { request, .. } => {
                if open.is_some() {
                    return Err("planner called while a navigator session is open".into());
                }
                for m in &request.messages {
                    if line.is_match(&m.content) {
                        return Err(format!(
                            "planner message carries a distilled view: {:?}",
                            m.content
                        ));
                    }
                    if payloads.iter().any(|p| m.content.contains(p)) {
                        return Err("planner message carries a get_dom payload".into());
                    }
                }
            }
            TraceEvent::NavBegin { step, .. } => {
                if let Some(s) = open {
                    return Err(format!("sub-task {step} began while {s} was open"));
                }
                open = Some(*step);
                expect_first = true;
            }
            TraceEvent::NavRequest { step, request, .. } => {
                if open != Some(*step) {
                    return Err(format!(
                        "navigator request for step {step} outside its session"
                    ));
                }
                if expect_first {
                    let users = request
                        .messages
                        .iter()
                        .filter(|m| m.role == webnav::llm::Role::User)
                        .count();
                    if users != 1 || request.messages.len() != 2 {
                        return Err(format!(
                            "step {step} first request has {} messages, {users} from the user",
                            request.messages.len()
                        ));
                    }
                    expect_first = false;
                }
            }
            TraceEvent::NavEnd { step, .. } => {
                if open != Some(*step) {
                    return Err(format!("sub-task {step} ended without beginning"));
                }
                open = None;
            }
            _ => {}
        }
    }
    if open.is_some() {
        return Err("navigator session left open".into());
    }
    Ok(())
}

pub fn script_lines(responses: &[ChatResponse]) -> String {
    responses
        .iter()
        .enumerate()
        .map(|(i, r)| {
            ScriptEntry {
                ordinal: i as u64 + 1,
                request_hash: None,
                outcome: ScriptOutcome::Response(r.clone()),
            }
            .to_line()
                + "\n"
        })
        .collect()
}

// ---------------------------------------------------------------------------
// 20-task suite

const SUITE_SITES: &[(&str, &str, &str)] = &[
    ("sports", "popup-menu", "https://sports.test/"),
    ("recipes", "search-site", "https://recipes.test/"),
    ("flights", "flight-widget", "https://flights.test/"),
    ("design", "pricing-site", "https://design.test/"),
];

pub const SUITE_SIZE: usize = 20;

/// Writes `suite.jsonl` and one script per task into `dir`. Task kinds
/// rotate through success, success after a navigation step, admitted
/// failure, wrong answer against gold, and an exhausted script.
pub fn write_suite(dir: &Path) -> String {
    let mut suite = String::new();
    for i in 0..SUITE_SIZE {
        let (site, fixture, url) = SUITE_SITES[i % SUITE_SITES.len()];
        let id = format!("task-{i:02}");
        let gold = format!("{site}-{i}");
        let script = match i % 5 {
            0 => vec![ChatResponse::text(format!(
                "##TERMINATE TASK##\nThe code is {gold}."
            ))],
            1 => vec![
                ChatResponse::text("NEXT: Report the current URL."),
                ChatResponse::tool_call("c1", "get_current_url", json!({})),
                ChatResponse::text(format!("The current URL is {url}. ##SUBTASK DONE##")),
                ChatResponse::text(format!("##TERMINATE TASK##\nFound {gold} at {url}")),
            ],
            2 => vec![
                ChatResponse::text("NEXT: Look for the code on the page."),
                ChatResponse::tool_call("c1", "get_dom", json!({"content_type": "text_only"})),
                ChatResponse::text("There is no code on this page. ##SUBTASK DONE##"),
                ChatResponse::text("##TERMINATE TASK##\nI could not find the code on this site."),
            ],
            3 => vec![
                ChatResponse::text("NEXT: Read the input fields."),
                ChatResponse::tool_call("c1", "get_dom", json!({"content_type": "input_fields"})),
                ChatResponse::text("Read the fields. ##SUBTASK DONE##"),
                ChatResponse::text("##TERMINATE TASK##\nThe code is wrong-guess."),
            ],
            _ => vec![ChatResponse::text("NEXT: Open the home page.")],
        };
        std::fs::write(dir.join(format!("{id}.jsonl")), script_lines(&script))
            .expect("write script");
        let line = json!({
            "id": id,
            "site": site,
            "start": {"sim": fixture},
            "task": format!("Find the code for {site} task {i}."),
            "gold": {"substring": gold},
        });
        suite.push_str(&line.to_string());
        suite.push('\n');
    }
    std::fs::write(dir.join("suite.jsonl"), &suite).expect("write suite");
    suite
}

/// Spreadsheet-style recomputation from raw records: per-site rows in name
/// order, then the overall row.
pub fn recompute(records: &[TaskRecord]) -> Vec<GroupMetrics> {
    let mut sites: BTreeMap<String, Vec<&TaskRecord>> = BTreeMap::new();
    for r in records {
        sites.entry(r.site.clone()).or_default().push(r);
    }
    let mut groups: Vec<(String, Vec<&TaskRecord>)> = sites.into_iter().collect();
    groups.push((OVERALL.to_string(), records.iter().collect()));
    groups
        .into_iter()
        .map(|(site, rs)| {
            let n = rs.len() as f64;
            let mut success = 0.0;
            let mut aware = 0.0;
            let mut oblivious = 0.0;
            let (mut ts, mut ns, mut tf, mut nf) = (0.0, 0.0, 0.0, 0.0);
            let (mut total, mut planner, mut navigator) = (0.0, 0.0, 0.0);
            for r in &rs {
                match r.failure_kind {
                    None => {
                        success += 1.0;
                        ts += r.wall_time_s;
                        ns += 1.0;
                    }
                    Some(k) => {
                        if k == FailureKind::SelfAware {
                            aware += 1.0;
                        } else {
                            oblivious += 1.0;
                        }
                        tf += r.wall_time_s;
                        nf += 1.0;
                    }
                }
                total += r.ledger.total as f64;
                planner += r.ledger.planner as f64;
                navigator += r.ledger.navigator as f64;
            }
            GroupMetrics {
                site,
                tasks: rs.len(),
                success_pct: 100.0 * success / n,
                self_aware_pct: 100.0 * aware / n,
                oblivious_pct: 100.0 * oblivious / n,
                tct_success_s: (ns > 0.0).then(|| ts / ns),
                tct_failed_s: (nf > 0.0).then(|| tf / nf),
                calls_total: total / n,
                calls_planner: planner / n,
                calls_navigator: navigator / n,
            }
        })
        .collect()
}

/// Compares emitted rows against recomputed ones: percentages and calls
/// within `pct_tol`, seconds within half a unit of integer rounding.
pub fn compare_metrics(
    emitted: &[GroupMetrics],
    oracle: &[GroupMetrics],
    pct_tol: f64,
) -> Result<(), String> {
    if emitted.len() != oracle.len() {
        return Err(format!(
            "{} rows emitted, {} expected",
            emitted.len(),
            oracle.len()
        ));
    }
    for (e, o) in emitted.iter().zip(oracle) {
        if e.site != o.site || e.tasks != o.tasks {
            return Err(format!(
                "row {}/{} vs {}/{}",
                e.site, e.tasks, o.site, o.tasks
            ));
        }
        let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol + 1e-9;
        let pairs = [
            ("success", e.success_pct, o.success_pct),
            ("self_aware", e.self_aware_pct, o.self_aware_pct),
            ("oblivious", e.oblivious_pct, o.oblivious_pct),
            ("calls_total", e.calls_total, o.calls_total),
            ("calls_planner", e.calls_planner, o.calls_planner),
            ("calls_navigator", e.calls_navigator, o.calls_navigator),
        ];
        for (name, a, b) in pairs {
            if !close(a, b, pct_tol) {
                return Err(format!("{} {name}: {a} vs {b}", e.site));
            }
        }
        for (name, a, b) in [
            ("tct_success", e.tct_success_s, o.tct_success_s),
            ("tct_failed", e.tct_failed_s, o.tct_failed_s),
        ] {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) if close(a, b, 0.5) => {}
                _ => return Err(format!("{} {name}: {a:?} vs {b:?}", e.site)),
            }
        }
    }
    Ok(())
}
