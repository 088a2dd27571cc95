//! Parameters for the `Input` domain.

use serde_json::{json, Value};
use webnav::skills::{Key, KeyChord};

/// `code`, `windowsVirtualKeyCode` and inserted text for a key.
fn key_codes(key: Key) -> (String, u32, Option<String>) {
    let named = |code: &str, vk: u32| (code.to_string(), vk, None);
    match key {
        Key::Enter => (String::from("Enter"), 13, Some("\r".into())),
        Key::Tab => named("Tab", 9),
        Key::Escape => named("Escape", 27),
        Key::Backspace => named("Backspace", 8),
        Key::Delete => named("Delete", 46),
        Key::Home => named("Home", 36),
        Key::End => named("End", 35),
        Key::PageUp => named("PageUp", 33),
        Key::PageDown => named("PageDown", 34),
        Key::ArrowLeft => named("ArrowLeft", 37),
        Key::ArrowUp => named("ArrowUp", 38),
        Key::ArrowRight => named("ArrowRight", 39),
        Key::ArrowDown => named("ArrowDown", 40),
        Key::Space => (String::from("Space"), 32, Some(" ".into())),
        Key::Char(c) => {
            let upper = c.to_ascii_uppercase();
            let (code, vk) = match upper {
                'A'..='Z' => (format!("Key{upper}"), upper as u32),
                '0'..='9' => (format!("Digit{c}"), c as u32),
                _ => (String::new(), 0),
            };
            (code, vk, Some(c.to_string()))
        }
    }
}

/// `Input.dispatchKeyEvent` parameter objects for one chord, down then up.
/// Text is suppressed while Control, Alt or Meta is held, as in a browser.
pub fn key_events(chord: &KeyChord) -> Vec<Value> {
    let (code, vk, text) = key_codes(chord.key);
    let mask = chord.modifier_mask();
    let shortcut = mask & !8 != 0;
    let text = text.filter(|_| !shortcut);
    let key = chord.key.dom_key();
    let mut down = json!({
        "type": if text.is_some() { "keyDown" } else { "rawKeyDown" },
        "key": key,
        "code": code,
        "windowsVirtualKeyCode": vk,
        "modifiers": mask,
    });
    if let Some(t) = &text {
        down["text"] = json!(t);
        down["unmodifiedText"] = json!(t);
    }
    let up = json!({
        "type": "keyUp",
        "key": key,
        "code": code,
        "windowsVirtualKeyCode": vk,
        "modifiers": mask,
    });
    vec![down, up]
}

/// `Input.dispatchMouseEvent` parameter objects for a left click.
pub fn click_events(x: f64, y: f64) -> Vec<Value> {
    ["mouseMoved", "mousePressed", "mouseReleased"]
        .into_iter()
        .map(|kind| {
            let mut e = json!({"type": kind, "x": x, "y": y});
            if kind != "mouseMoved" {
                e["button"] = json!("left");
                e["clickCount"] = json!(1);
            }
            e
        })
        .collect()
}
