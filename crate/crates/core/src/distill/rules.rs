use serde::{Deserialize, Serialize};

use crate::dom::DomNode;

/// Configurable tables deciding which elements count as interactive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractiveRules {
    /// Always-interactive tags. `a` (needs href) and `input` (not hidden)
    /// are handled separately.
    pub tags: Vec<String>,
    /// Widget roles that make any element interactive.
    pub roles: Vec<String>,
    /// Click-handler markers left by frameworks.
    pub marker_attributes: Vec<String>,
}

pub const INTERACTIVE_TAGS: &[&str] = &["button", "select", "option", "textarea", "summary"];

pub const INTERACTIVE_ROLES: &[&str] = &[
    "button",
    "link",
    "checkbox",
    "radio",
    "switch",
    "textbox",
    "searchbox",
    "combobox",
    "option",
    "menuitem",
    "menuitemcheckbox",
    "menuitemradio",
    "tab",
    "slider",
    "spinbutton",
    "treeitem",
];

pub const MARKER_ATTRIBUTES: &[&str] = &[
    "onclick",
    "ng-click",
    "v-on:click",
    "@click",
    "jsaction",
    "data-action",
];

impl Default for InteractiveRules {
    fn default() -> Self {
        Self {
            tags: INTERACTIVE_TAGS.iter().map(|s| s.to_string()).collect(),
            roles: INTERACTIVE_ROLES.iter().map(|s| s.to_string()).collect(),
            marker_attributes: MARKER_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl InteractiveRules {
    pub fn is_interactive(&self, node: &DomNode) -> bool {
        if !node.is_element() {
            return false;
        }
        let tag = node.tag();
        match tag {
            "a" if node.attributes().contains("href") => return true,
            "input" => return !input_type(node).eq_ignore_ascii_case("hidden"),
            _ => {}
        }
        if self.tags.iter().any(|t| t == tag) {
            return true;
        }
        if node
            .attr("contenteditable")
            .is_some_and(|v| !v.trim().eq_ignore_ascii_case("false"))
        {
            return true;
        }
        if let Some(role) = explicit_role(node) {
            if self.roles.contains(&role) {
                return true;
            }
        }
        if self
            .marker_attributes
            .iter()
            .any(|a| node.attributes().contains(a))
        {
            return true;
        }
        node.attr("tabindex")
            .and_then(|v| v.trim().parse::<i32>().ok())
            .is_some_and(|v| v >= 0)
    }
}

/// Interactivity under the default rule tables.
pub fn is_interactive(node: &DomNode) -> bool {
    thread_local! {
        static RULES: InteractiveRules = InteractiveRules::default();
    }
    RULES.with(|r| r.is_interactive(node))
}

/// First token of the `role` attribute, lowercased.
pub fn explicit_role(node: &DomNode) -> Option<String> {
    node.attr("role")
        .and_then(|r| r.split_whitespace().next())
        .map(|r| r.to_ascii_lowercase())
}

pub(crate) fn input_type(node: &DomNode) -> String {
    node.attr("type")
        .map(|t| t.trim().to_ascii_lowercase())
        .unwrap_or_else(|| "text".to_string())
}

/// Widget role shown to the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetRole {
    Button,
    Link,
    Textbox,
    Combobox,
    Listbox,
    Option,
    Menuitem,
    Tab,
    Checkbox,
    Other,
}

impl WidgetRole {
    pub fn as_str(self) -> &'static str {
        match self {
            WidgetRole::Button => "button",
            WidgetRole::Link => "link",
            WidgetRole::Textbox => "textbox",
            WidgetRole::Combobox => "combobox",
            WidgetRole::Listbox => "listbox",
            WidgetRole::Option => "option",
            WidgetRole::Menuitem => "menuitem",
            WidgetRole::Tab => "tab",
            WidgetRole::Checkbox => "checkbox",
            WidgetRole::Other => "other",
        }
    }
}

impl std::fmt::Display for WidgetRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

const TEXT_INPUT_TYPES: &[&str] = &[
    "text",
    "search",
    "email",
    "tel",
    "url",
    "password",
    "number",
    "date",
    "datetime-local",
    "month",
    "week",
    "time",
];

pub fn widget_role(node: &DomNode) -> WidgetRole {
    if !node.is_element() {
        return WidgetRole::Other;
    }
    if let Some(role) = explicit_role(node) {
        let mapped = match role.as_str() {
            "button" => Some(WidgetRole::Button),
            "link" => Some(WidgetRole::Link),
            "textbox" | "searchbox" | "spinbutton" => Some(WidgetRole::Textbox),
            "combobox" => Some(WidgetRole::Combobox),
            "listbox" => Some(WidgetRole::Listbox),
            "option" | "treeitem" => Some(WidgetRole::Option),
            "menuitem" | "menuitemcheckbox" | "menuitemradio" => Some(WidgetRole::Menuitem),
            "tab" => Some(WidgetRole::Tab),
            "checkbox" | "radio" | "switch" => Some(WidgetRole::Checkbox),
            _ => None,
        };
        if let Some(r) = mapped {
            return r;
        }
    }
    match node.tag() {
        "a" if node.attributes().contains("href") => WidgetRole::Link,
        "button" | "summary" => WidgetRole::Button,
        "select" => WidgetRole::Combobox,
        "option" => WidgetRole::Option,
        "textarea" => WidgetRole::Textbox,
        "input" => {
            let t = input_type(node);
            match t.as_str() {
                "button" | "submit" | "reset" | "image" => WidgetRole::Button,
                "checkbox" | "radio" => WidgetRole::Checkbox,
                _ if node.attributes().contains("list") => WidgetRole::Combobox,
                _ if TEXT_INPUT_TYPES.contains(&t.as_str()) => WidgetRole::Textbox,
                _ => WidgetRole::Other,
            }
        }
        _ if is_content_editable(node) => WidgetRole::Textbox,
        _ => WidgetRole::Other,
    }
}

fn is_content_editable(node: &DomNode) -> bool {
    node.attr("contenteditable")
        .is_some_and(|v| !v.trim().eq_ignore_ascii_case("false"))
}

/// Elements that accept typed text.
pub fn accepts_text(node: &DomNode) -> bool {
    if !node.is_element() {
        return false;
    }
    match node.tag() {
        "textarea" => true,
        "input" => TEXT_INPUT_TYPES.contains(&input_type(node).as_str()),
        _ => {
            is_content_editable(node)
                || matches!(
                    explicit_role(node).as_deref(),
                    Some("textbox" | "searchbox")
                )
        }
    }
}

/// Elements whose subtree never contributes to any view.
pub const NOISE_TAGS: &[&str] = &[
    "script", "style", "noscript", "template", "head", "meta", "link", "base", "title", "iframe",
    "object", "embed", "svg", "canvas",
];

pub fn is_noise_tag(tag: &str) -> bool {
    NOISE_TAGS.contains(&tag)
}

/// Text-only visibility: no layout, so only markup signals are used.
pub fn is_hidden(node: &DomNode) -> bool {
    if !node.is_element() {
        return false;
    }
    let attrs = node.attributes();
    if attrs.contains("hidden") {
        return true;
    }
    if attrs
        .get("aria-hidden")
        .is_some_and(|v| v.trim().eq_ignore_ascii_case("true"))
    {
        return true;
    }
    if node.tag() == "input" && input_type(node) == "hidden" {
        return true;
    }
    if node.tag() == "dialog" && !attrs.contains("open") {
        return true;
    }
    if let Some(style) = attrs.get("style") {
        let compact: String = style
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        if compact.contains("display:none") || compact.contains("visibility:hidden") {
            return true;
        }
    }
    false
}

pub fn is_heading(node: &DomNode) -> bool {
    matches!(node.tag(), "h1" | "h2" | "h3" | "h4" | "h5" | "h6")
        || explicit_role(node).as_deref() == Some("heading")
}

pub fn is_labeling(node: &DomNode) -> bool {
    matches!(node.tag(), "label" | "legend" | "caption")
}

/// Form grouping survives in both element views and is never collapsed.
pub fn is_form_group(node: &DomNode) -> bool {
    matches!(node.tag(), "form" | "fieldset")
        || matches!(
            explicit_role(node).as_deref(),
            Some("form" | "search" | "group")
        )
}

const LANDMARK_TAGS: &[&str] = &[
    "nav", "main", "header", "footer", "aside", "section", "article", "dialog", "ul", "ol", "menu",
    "table", "details", "search",
];

const LANDMARK_ROLES: &[&str] = &[
    "navigation",
    "main",
    "banner",
    "contentinfo",
    "complementary",
    "region",
    "dialog",
    "alertdialog",
    "menu",
    "menubar",
    "listbox",
    "list",
    "tablist",
    "tree",
    "grid",
    "toolbar",
    "radiogroup",
];

pub fn is_landmark(node: &DomNode) -> bool {
    LANDMARK_TAGS.contains(&node.tag())
        || explicit_role(node).is_some_and(|r| LANDMARK_ROLES.contains(&r.as_str()))
}
