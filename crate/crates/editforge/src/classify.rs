//! Task-category classification.
//!
//! Renders the classification prompt for one record, validates the model's
//! JSON reply against the five-key schema, and normalizes the extracted
//! `process_answer`. Model-echoed question/answer text is discarded in favor
//! of the local record so paraphrase drift cannot corrupt the ledger.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::ingest::VqaRecord;
use crate::jsonx;
use crate::message::ChatMessage;
use crate::templates;

/// Edit-type taxonomy. `knowledge` is never produced by the classifier; it
/// enters the pipeline only through the knowledge merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditCategory {
    Shape,
    Count,
    Bool,
    Color,
    Location,
    Caption,
    Ocr,
    Math,
    MultiChoice,
    Others,
    Knowledge,
}

impl EditCategory {
    pub const ALL: [EditCategory; 11] = [
        EditCategory::Shape,
        EditCategory::Count,
        EditCategory::Bool,
        EditCategory::Color,
        EditCategory::Location,
        EditCategory::Caption,
        EditCategory::Ocr,
        EditCategory::Math,
        EditCategory::MultiChoice,
        EditCategory::Others,
        EditCategory::Knowledge,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            EditCategory::Shape => "shape",
            EditCategory::Count => "count",
            EditCategory::Bool => "bool",
            EditCategory::Color => "color",
            EditCategory::Location => "location",
            EditCategory::Caption => "caption",
            EditCategory::Ocr => "ocr",
            EditCategory::Math => "math",
            EditCategory::MultiChoice => "multi-choice",
            EditCategory::Others => "others",
            EditCategory::Knowledge => "knowledge",
        }
    }

    pub fn parse(label: &str) -> Option<EditCategory> {
        Self::ALL.iter().copied().find(|c| c.label() == label)
    }

    /// Categories whose `process_answer` must be an exact copy of the
    /// original answer.
    pub fn copies_original_answer(&self) -> bool {
        matches!(
            self,
            EditCategory::Caption
                | EditCategory::Math
                | EditCategory::MultiChoice
                | EditCategory::Others
        )
    }
}

impl fmt::Display for EditCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A VqaRecord plus the classifier's output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedRecord {
    #[serde(flatten)]
    pub record: VqaRecord,
    pub task_category: EditCategory,
    pub process_answer: String,
}

/// Render the classification request for one record.
///
/// The system message is the stored template, byte for byte. The user
/// message interpolates the record into the `Input:` layout used by the
/// template's own examples.
pub fn render_classification_prompt(record: &VqaRecord) -> Vec<ChatMessage> {
    let user = format!(
        "Input:\noriginal question: {}\noriginal answer: {}\nimage_path: {}\n\nOutput:\n",
        record.original_question, record.original_answer, record.image_path
    );
    vec![
        ChatMessage::system(templates::CLASSIFY_SYSTEM),
        ChatMessage::user(user),
    ]
}

/// Parse and validate a classification reply.
///
/// Requires the five documented keys and a known category label. The
/// original fields are echoed from the local record, never from the reply.
pub fn parse_classification_response(text: &str, record: &VqaRecord) -> Result<ClassifiedRecord> {
    let value = jsonx::first_json_object(text)?;

    for key in [
        "task_category",
        "original_question",
        "original_answer",
        "process_answer",
        "image_path",
    ] {
        if value.get(key).is_none() {
            return Err(ForgeError::Parse(format!(
                "classification reply is missing required key `{key}`"
            )));
        }
    }

    let label = jsonx::required_str(&value, "task_category")?;
    let category = EditCategory::parse(label)
        .ok_or_else(|| ForgeError::Parse(format!("unknown task_category `{label}`")))?;
    if category == EditCategory::Knowledge {
        return Err(ForgeError::Parse(
            "classifier may not emit `knowledge`".into(),
        ));
    }

    let process_answer = jsonx::required_str(&value, "process_answer")?.to_string();

    Ok(ClassifiedRecord {
        record: record.clone(),
        task_category: category,
        process_answer,
    })
}

/// Enforce the per-category `process_answer` contract.
///
/// Copy categories get the original answer verbatim (repairing truncated or
/// paraphrased replies); extraction categories keep the reply, trimmed.
/// Idempotent.
pub fn normalize_process_answer(mut classified: ClassifiedRecord) -> ClassifiedRecord {
    if classified.task_category.copies_original_answer() {
        classified.process_answer = classified.record.original_answer.clone();
    } else {
        classified.process_answer = classified.process_answer.trim().to_string();
    }
    classified
}

/// Parse, normalize, and check the non-empty invariant in one step.
pub fn classify_reply(text: &str, record: &VqaRecord) -> Result<ClassifiedRecord> {
    let classified = normalize_process_answer(parse_classification_response(text, record)?);
    if classified.process_answer.is_empty() {
        return Err(ForgeError::Parse("empty process_answer".into()));
    }
    Ok(classified)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(question: &str, answer: &str, image: &str) -> VqaRecord {
        VqaRecord {
            id: "t1".into(),
            original_question: question.into(),
            original_answer: answer.into(),
            image_path: image.into(),
            source_dataset: String::new(),
        }
    }

    #[test]
    fn system_message_is_the_stored_template() {
        let r = record("What shape?", "cube", "a.png");
        let messages = render_classification_prompt(&r);
        assert_eq!(messages[0].text(), templates::CLASSIFY_SYSTEM);
        assert!(messages[0].text().contains("Determine the `task_category`"));
    }

    #[test]
    fn two_records_share_the_system_message() {
        let a = render_classification_prompt(&record("Q1", "A1", "a.png"));
        let b = render_classification_prompt(&record("Q2", "A2", "b.png"));
        assert_eq!(a[0].text(), b[0].text());
        assert_ne!(a[1].text(), b[1].text());
    }

    #[test]
    fn parse_rejects_unknown_category() {
        let reply = r#"{"task_category":"mystery","original_question":"q","original_answer":"a","process_answer":"x","image_path":"p"}"#;
        let err = parse_classification_response(reply, &record("q", "a", "p")).unwrap_err();
        assert!(err.is_retriable());
    }

    #[test]
    fn parse_rejects_knowledge_from_classifier() {
        let reply = r#"{"task_category":"knowledge","original_question":"q","original_answer":"a","process_answer":"x","image_path":"p"}"#;
        assert!(parse_classification_response(reply, &record("q", "a", "p")).is_err());
    }

    #[test]
    fn parse_rejects_missing_key() {
        let reply = r#"{"task_category":"shape","original_answer":"a","process_answer":"x","image_path":"p"}"#;
        assert!(parse_classification_response(reply, &record("q", "a", "p")).is_err());
    }

    #[test]
    fn local_fields_win_over_echoed_fields() {
        let reply = r#"{"task_category":"shape","original_question":"PARAPHRASED","original_answer":"PARAPHRASED","process_answer":"cube","image_path":"elsewhere.png"}"#;
        let r = record("the real question", "the real answer", "real.png");
        let c = parse_classification_response(reply, &r).unwrap();
        assert_eq!(c.record.original_question, "the real question");
        assert_eq!(c.record.image_path, "real.png");
    }

    #[test]
    fn fenced_reply_parses_like_unfenced() {
        let bare = r#"{"task_category":"count","original_question":"q","original_answer":"a","process_answer":"5","image_path":"p"}"#;
        let fenced = format!("```json\n{bare}\n```");
        let r = record("q", "a", "p");
        assert_eq!(
            parse_classification_response(bare, &r).unwrap(),
            parse_classification_response(&fenced, &r).unwrap()
        );
    }

    #[test]
    fn normalize_copies_for_math() {
        let r = record("q", "full reasoning ... final answer is 8.89.", "p");
        let c = ClassifiedRecord {
            record: r,
            task_category: EditCategory::Math,
            process_answer: "truncated".into(),
        };
        let n = normalize_process_answer(c);
        assert_eq!(n.process_answer, "full reasoning ... final answer is 8.89.");
    }

    #[test]
    fn normalize_trims_for_count() {
        let c = ClassifiedRecord {
            record: record("q", "a", "p"),
            task_category: EditCategory::Count,
            process_answer: " 5 ".into(),
        };
        assert_eq!(normalize_process_answer(c).process_answer, "5");
    }

    #[test]
    fn normalize_is_idempotent() {
        for category in EditCategory::ALL {
            let c = ClassifiedRecord {
                record: record("q", "the answer", "p"),
                task_category: category,
                process_answer: "  value  ".into(),
            };
            let once = normalize_process_answer(c);
            let twice = normalize_process_answer(once.clone());
            assert_eq!(once, twice, "category {category}");
        }
    }

    #[test]
    fn category_labels_round_trip() {
        for c in EditCategory::ALL {
            assert_eq!(EditCategory::parse(c.label()), Some(c));
        }
        assert_eq!(EditCategory::parse("multi-choice"), Some(EditCategory::MultiChoice));
        assert_eq!(EditCategory::parse("nonsense"), None);
    }
}
