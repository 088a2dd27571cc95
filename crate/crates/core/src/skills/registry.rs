use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    String,
    Integer,
    StringArray,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub description: String,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<String>>,
}

impl ParamSpec {
    fn new(name: &str, kind: ParamKind, description: &str, required: bool) -> Self {
        Self {
            name: name.to_string(),
            kind,
            description: description.to_string(),
            required,
            allowed: None,
        }
    }
}

/// A skill as offered to the model for function calling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDescriptor {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
}

impl SkillDescriptor {
    /// Chat-completions `tools[]` entry.
    pub fn to_tool_schema(&self) -> Value {
        let mut props = Map::new();
        for p in &self.parameters {
            let mut schema = match p.kind {
                ParamKind::String => json!({"type": "string"}),
                ParamKind::Integer => json!({"type": "integer", "minimum": 1}),
                ParamKind::StringArray => {
                    json!({"type": "array", "items": {"type": "string"}, "minItems": 1})
                }
            };
            schema["description"] = Value::String(p.description.clone());
            if let Some(allowed) = &p.allowed {
                schema["enum"] = json!(allowed);
            }
            props.insert(p.name.clone(), schema);
        }
        let required: Vec<&str> = self
            .parameters
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": props,
                    "required": required,
                },
            },
        })
    }
}

pub const OPEN_URL: &str = "open_url";
pub const CLICK: &str = "click";
pub const ENTER_TEXT: &str = "enter_text";
pub const PRESS_KEYS: &str = "press_keys";
pub const GET_DOM: &str = "get_dom";
pub const GET_CURRENT_URL: &str = "get_current_url";
pub const ASK_USER: &str = "ask_user";

/// Skills offered to the navigation agent; `ask_user` only with a human
/// in the loop.
pub fn navigator_skills(human_in_the_loop: bool) -> Vec<SkillDescriptor> {
    use ParamKind::*;
    let mmid = |required: bool, what: &str| ParamSpec::new("mmid", Integer, what, required);
    let mut skills = vec![
        SkillDescriptor {
            name: OPEN_URL.into(),
            description: "Open an absolute URL in the browser. Returns the final URL and the page title.".into(),
            parameters: vec![ParamSpec::new("url", String, "Absolute URL to open.", true)],
        },
        SkillDescriptor {
            name: CLICK.into(),
            description: "Click the element with the given mmid. Returns what changed on the page as a result.".into(),
            parameters: vec![mmid(true, "mmid of the element to click.")],
        },
        SkillDescriptor {
            name: ENTER_TEXT.into(),
            description: "Clear the text field with the given mmid and type the text into it. Does not submit; press Enter or click a button afterwards if needed. Returns what changed on the page.".into(),
            parameters: vec![
                mmid(true, "mmid of the text field."),
                ParamSpec::new("text", String, "Text to type.", true),
            ],
        },
        SkillDescriptor {
            name: PRESS_KEYS.into(),
            description: "Press one or more key chords, e.g. Enter, Tab, Escape, ArrowDown or Control+a, on the element with the given mmid or on the focused element. Returns what changed on the page.".into(),
            parameters: vec![
                ParamSpec::new("keys", StringArray, "Key chords in order.", true),
                mmid(false, "mmid of the element to send keys to."),
            ],
        },
        SkillDescriptor {
            name: GET_DOM.into(),
            description: "Read the current page. text_only gives the visible text; input_fields lists form fields and buttons with their mmids; all_fields lists every interactive element with headings and page sections, nested as on the page.".into(),
            parameters: vec![ParamSpec {
                allowed: Some(vec!["text_only".into(), "input_fields".into(), "all_fields".into()]),
                ..ParamSpec::new("content_type", String, "Which representation to return.", true)
            }],
        },
        SkillDescriptor {
            name: GET_CURRENT_URL.into(),
            description: "Return the URL of the current page.".into(),
            parameters: vec![],
        },
    ];
    if human_in_the_loop {
        skills.push(SkillDescriptor {
            name: ASK_USER.into(),
            description: "Ask the user a question, e.g. for missing details or confirmation, and wait for the reply.".into(),
            parameters: vec![ParamSpec::new("prompt", String, "Question for the user.", true)],
        });
    }
    skills
}
