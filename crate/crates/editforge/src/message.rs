//! Chat message model shared by prompt renderers and backends.

use serde::{Deserialize, Serialize};

use crate::hashing::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One piece of message content. Images travel as raw bytes internally;
/// backends encode them for their wire format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentPart {
    Text(String),
    Image { media_type: String, data: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            parts: vec![ContentPart::Text(text.into())],
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            parts: vec![ContentPart::Text(text.into())],
        }
    }

    pub fn push_image(&mut self, media_type: impl Into<String>, data: Vec<u8>) {
        self.parts.push(ContentPart::Image {
            media_type: media_type.into(),
            data,
        });
    }

    /// Concatenated text parts; images are elided.
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text(t) => Some(t.as_str()),
                ContentPart::Image { .. } => None,
            })
            .collect()
    }

    /// Content fingerprint used by the mock transcript to detect duplicate
    /// calls. Covers text and image bytes in order.
    pub fn fingerprint(&self) -> String {
        let mut acc = Vec::new();
        for part in &self.parts {
            match part {
                ContentPart::Text(t) => {
                    acc.extend_from_slice(b"t:");
                    acc.extend_from_slice(t.as_bytes());
                }
                ContentPart::Image { data, .. } => {
                    acc.extend_from_slice(b"i:");
                    acc.extend_from_slice(sha256_hex(data).as_bytes());
                }
            }
            acc.push(0x1f);
        }
        sha256_hex(&acc)
    }

    pub fn image_count(&self) -> usize {
        self.parts
            .iter()
            .filter(|p| matches!(p, ContentPart::Image { .. }))
            .count()
    }
}

/// Fingerprint of a whole request (role + content of every message).
pub fn conversation_fingerprint(messages: &[ChatMessage]) -> String {
    let mut acc = String::new();
    for m in messages {
        acc.push_str(match m.role {
            Role::System => "s|",
            Role::User => "u|",
            Role::Assistant => "a|",
        });
        acc.push_str(&m.fingerprint());
        acc.push('\n');
    }
    sha256_hex(acc.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_elides_images() {
        let mut m = ChatMessage::user("hello");
        m.push_image("image/png", vec![1, 2, 3]);
        assert_eq!(m.text(), "hello");
        assert_eq!(m.image_count(), 1);
    }

    #[test]
    fn fingerprint_sees_image_bytes() {
        let mut a = ChatMessage::user("x");
        a.push_image("image/png", vec![1]);
        let mut b = ChatMessage::user("x");
        b.push_image("image/png", vec![2]);
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
