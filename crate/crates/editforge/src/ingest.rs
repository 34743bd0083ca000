//! Loading, validation, and deduplication of source VQA records.
//!
//! Input is UTF-8 line-delimited JSON, one object per line:
//! `{id?, original_question, original_answer, image_path, source_dataset?}`.
//! Malformed lines are never dropped silently; each one produces a rejection
//! entry carrying its line number, so `lines_read = records + rejections`
//! always holds.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::hashing::sha256_fields;

/// One source understanding sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaRecord {
    /// Opaque unique id; backfilled with a content hash when absent.
    pub id: String,
    pub original_question: String,
    pub original_answer: String,
    /// Path relative to the configured image root.
    pub image_path: String,
    #[serde(default)]
    pub source_dataset: String,
}

/// A line that could not become a record, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line_number: usize,
    pub reason: String,
}

/// Outcome of reading one input file.
#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub records: Vec<VqaRecord>,
    pub rejections: Vec<Rejection>,
    pub lines_read: usize,
}

#[derive(Debug, Deserialize)]
struct RawLine {
    id: Option<String>,
    original_question: Option<String>,
    original_answer: Option<String>,
    image_path: Option<String>,
    #[serde(default)]
    source_dataset: Option<String>,
}

/// Normalized dedup key over (question, answer, image_path).
///
/// Whitespace-trimmed before hashing, so records differing only in
/// surrounding whitespace collide deliberately.
pub fn dedup_key(record: &VqaRecord) -> String {
    sha256_fields(&[
        record.original_question.trim(),
        record.original_answer.trim(),
        record.image_path.trim(),
    ])
}

/// Stable content id for records that arrive without one.
fn content_id(question: &str, answer: &str, image_path: &str) -> String {
    let digest = sha256_fields(&["vqa", question.trim(), answer.trim(), image_path.trim()]);
    digest[..32].to_string()
}

/// Load, validate, and deduplicate an input file.
///
/// Order is preserved. Every line ends up either in `records` or in
/// `rejections`; an unreadable file is fatal.
pub fn load_vqa_dataset(path: &Path, image_root: &Path) -> Result<IngestOutcome> {
    let file = File::open(path).map_err(|e| ForgeError::io(path, e))?;
    let reader = BufReader::new(file);

    let mut outcome = IngestOutcome::default();
    let mut seen_keys = std::collections::HashSet::new();
    let mut seen_ids = std::collections::HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_number = idx + 1;
        let line = line.map_err(|e| ForgeError::io(path, e))?;
        outcome.lines_read += 1;

        match parse_line(&line, image_root) {
            Ok(record) => {
                let key = dedup_key(&record);
                if !seen_keys.insert(key) {
                    outcome.rejections.push(Rejection {
                        line_number,
                        reason: "duplicate record (question, answer, image_path)".into(),
                    });
                } else if !seen_ids.insert(record.id.clone()) {
                    outcome.rejections.push(Rejection {
                        line_number,
                        reason: format!("duplicate id `{}`", record.id),
                    });
                } else {
                    outcome.records.push(record);
                }
            }
            Err(reason) => outcome.rejections.push(Rejection {
                line_number,
                reason,
            }),
        }
    }

    debug_assert_eq!(
        outcome.lines_read,
        outcome.records.len() + outcome.rejections.len()
    );
    Ok(outcome)
}

fn parse_line(line: &str, image_root: &Path) -> std::result::Result<VqaRecord, String> {
    if line.trim().is_empty() {
        return Err("empty line".into());
    }
    let raw: RawLine =
        serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;

    let question = raw
        .original_question
        .ok_or("missing field `original_question`")?;
    if question.trim().is_empty() {
        return Err("`original_question` is empty".into());
    }
    let answer = raw
        .original_answer
        .ok_or("missing field `original_answer`")?;
    if answer.trim().is_empty() {
        return Err("`original_answer` is empty".into());
    }
    let image_path = raw.image_path.ok_or("missing field `image_path`")?;
    if image_path.trim().is_empty() {
        return Err("`image_path` is empty".into());
    }

    let resolved = resolve_image(image_root, image_path.trim());
    if !resolved.is_file() {
        return Err(format!("image file not found: {}", resolved.display()));
    }

    let id = match raw.id {
        Some(id) if !id.trim().is_empty() => id.trim().to_string(),
        _ => content_id(&question, &answer, &image_path),
    };

    Ok(VqaRecord {
        id,
        original_question: question.trim().to_string(),
        original_answer: answer.trim().to_string(),
        image_path: image_path.trim().to_string(),
        source_dataset: raw.source_dataset.unwrap_or_default(),
    })
}

/// Join an image path onto the configured root.
pub fn resolve_image(image_root: &Path, image_path: &str) -> PathBuf {
    image_root.join(image_path)
}
