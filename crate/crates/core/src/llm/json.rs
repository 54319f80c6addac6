//! Recovery of a JSON payload from free-form model output.

use serde_json::Value as Json;

use super::LlmError;

/// Strips markdown fences and surrounding prose, then returns the first
/// well-formed JSON object or array found scanning left to right.
pub fn extract_json(raw_text: &str) -> Result<Json, LlmError> {
    let fenced = fenced_blocks(raw_text);
    for candidate in fenced.iter().map(String::as_str).chain(std::iter::once(raw_text)) {
        if let Some(v) = first_json_value(candidate) {
            return Ok(v);
        }
    }
    Err(LlmError::Parse(format!("no JSON object or array in response: {}", preview(raw_text))))
}

fn first_json_value(text: &str) -> Option<Json> {
    for (i, c) in text.char_indices() {
        if c != '{' && c != '[' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Json>();
        if let Some(Ok(v)) = stream.next() {
            return Some(v);
        }
    }
    None
}

/// Contents of ``` fenced blocks, in order. An unterminated fence runs to the end.
fn fenced_blocks(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        // skip the info string (e.g. `json`) up to the end of the line
        let body_start = after.find('\n').map_or(after.len(), |n| n + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(end) => {
                out.push(body[..end].to_string());
                rest = &body[end + 3..];
            }
            None => {
                out.push(body.to_string());
                break;
            }
        }
    }
    out
}

fn preview(s: &str) -> String {
    let mut p: String = s.chars().take(80).collect();
    if s.chars().count() > 80 {
        p.push('…');
    }
    p
}
