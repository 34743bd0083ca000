//! Lenient JSON extraction for model replies.
//!
//! Prompts demand "only the final JSON object and nothing else", but real
//! replies wrap the object in code fences or prose. Tolerance lives here;
//! strictness lives in the schema validation done by each caller.

use serde_json::Value;

use crate::error::{ForgeError, Result};

/// Extract and parse the first complete JSON object from free-form text.
///
/// Scans for the first balanced `{...}` span outside string literals, then
/// parses it strictly. Fences and surrounding prose are ignored by
/// construction; no fence-specific stripping is needed.
pub fn first_json_object(text: &str) -> Result<Value> {
    let span = first_balanced_object(text)
        .ok_or_else(|| ForgeError::Parse("no JSON object found in reply".into()))?;
    serde_json::from_str(span)
        .map_err(|e| ForgeError::Parse(format!("reply contained malformed JSON: {e}")))
}

/// Locate the first balanced top-level `{...}` span, honoring JSON string
/// escapes so braces inside strings do not confuse the depth counter.
fn first_balanced_object(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let mut start = None;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;

    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' if start.is_some() => in_string = true,
            b'{' => {
                if start.is_none() {
                    start = Some(i);
                }
                depth += 1;
            }
            b'}' if start.is_some() => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start.unwrap()..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Fetch a required string field from an extracted object.
pub fn required_str<'a>(value: &'a Value, key: &str) -> Result<&'a str> {
    value
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| ForgeError::Parse(format!("reply is missing required key `{key}`")))
}
