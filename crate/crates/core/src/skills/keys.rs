use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modifier {
    Control,
    Shift,
    Alt,
    Meta,
}

impl Modifier {
    pub fn as_str(self) -> &'static str {
        match self {
            Modifier::Control => "Control",
            Modifier::Shift => "Shift",
            Modifier::Alt => "Alt",
            Modifier::Meta => "Meta",
        }
    }

    /// Bit used by the DevTools input domain.
    pub fn cdp_bit(self) -> u32 {
        match self {
            Modifier::Alt => 1,
            Modifier::Control => 2,
            Modifier::Meta => 4,
            Modifier::Shift => 8,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "control" | "ctrl" => Some(Modifier::Control),
            "shift" => Some(Modifier::Shift),
            "alt" | "option" => Some(Modifier::Alt),
            "meta" | "cmd" | "command" => Some(Modifier::Meta),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Key {
    Enter,
    Tab,
    Escape,
    ArrowUp,
    ArrowDown,
    ArrowLeft,
    ArrowRight,
    Backspace,
    Delete,
    Home,
    End,
    PageUp,
    PageDown,
    Space,
    Char(char),
}

impl Key {
    const NAMED: [(Key, &'static str); 14] = [
        (Key::Enter, "Enter"),
        (Key::Tab, "Tab"),
        (Key::Escape, "Escape"),
        (Key::ArrowUp, "ArrowUp"),
        (Key::ArrowDown, "ArrowDown"),
        (Key::ArrowLeft, "ArrowLeft"),
        (Key::ArrowRight, "ArrowRight"),
        (Key::Backspace, "Backspace"),
        (Key::Delete, "Delete"),
        (Key::Home, "Home"),
        (Key::End, "End"),
        (Key::PageUp, "PageUp"),
        (Key::PageDown, "PageDown"),
        (Key::Space, "Space"),
    ];

    /// DOM `key` value.
    pub fn dom_key(self) -> String {
        match self {
            Key::Space => " ".to_string(),
            Key::Char(c) => c.to_string(),
            named => named.name().to_string(),
        }
    }

    fn name(self) -> &'static str {
        Key::NAMED
            .iter()
            .find(|(k, _)| *k == self)
            .map(|(_, n)| *n)
            .unwrap_or("")
    }

    /// Character inserted when typed without modifiers.
    pub fn printable(self) -> Option<char> {
        match self {
            Key::Char(c) => Some(c),
            Key::Space => Some(' '),
            _ => None,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        let mut chars = s.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            return (!c.is_control()).then_some(Key::Char(c));
        }
        let lower = s.to_ascii_lowercase();
        let alias = match lower.as_str() {
            "esc" => Some(Key::Escape),
            "return" => Some(Key::Enter),
            "up" => Some(Key::ArrowUp),
            "down" => Some(Key::ArrowDown),
            "left" => Some(Key::ArrowLeft),
            "right" => Some(Key::ArrowRight),
            "del" => Some(Key::Delete),
            _ => None,
        };
        alias.or_else(|| {
            Key::NAMED
                .iter()
                .find(|(_, n)| n.eq_ignore_ascii_case(s))
                .map(|(k, _)| *k)
        })
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Char(c) => write!(f, "{c}"),
            k => f.write_str(k.name()),
        }
    }
}

/// A key with held modifiers, written `Control+Shift+a`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KeyChord {
    pub modifiers: Vec<Modifier>,
    pub key: Key,
}

impl KeyChord {
    pub fn plain(key: Key) -> Self {
        Self {
            modifiers: Vec::new(),
            key,
        }
    }

    pub fn modifier_mask(&self) -> u32 {
        self.modifiers.iter().map(|m| m.cdp_bit()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown key {0:?}")]
pub struct UnknownKey(pub String);

impl FromStr for KeyChord {
    type Err = UnknownKey;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(UnknownKey(s.to_string()));
        }
        // A trailing "+" is the plus key itself, as in "Control++".
        let (head, last) = match s.strip_suffix("++") {
            Some(h) => (h, "+"),
            None if s == "+" => ("", "+"),
            None => match s.rsplit_once('+') {
                Some((h, l)) => (h, l),
                None => ("", s),
            },
        };
        let key = Key::parse(last).ok_or_else(|| UnknownKey(s.to_string()))?;
        let mut modifiers = Vec::new();
        for part in head.split('+').filter(|p| !p.is_empty()) {
            let m = Modifier::parse(part.trim()).ok_or_else(|| UnknownKey(s.to_string()))?;
            if !modifiers.contains(&m) {
                modifiers.push(m);
            }
        }
        modifiers.sort();
        Ok(Self { modifiers, key })
    }
}

impl TryFrom<String> for KeyChord {
    type Error = UnknownKey;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<KeyChord> for String {
    fn from(c: KeyChord) -> String {
        c.to_string()
    }
}

impl fmt::Display for KeyChord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.modifiers {
            write!(f, "{}+", m.as_str())?;
        }
        write!(f, "{}", self.key)
    }
}
