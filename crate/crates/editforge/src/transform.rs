//! Question-to-instruction transformation.
//!
//! Each classified record is routed to a category-specific template, the
//! model's reply is parsed, and the resulting instruction is checked for
//! answer leakage and format constraints. Externally sourced knowledge
//! triples are merged here as already-transformed records.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifiedRecord, EditCategory};
use crate::error::{ForgeError, Result};
use crate::hashing::{seeded_hash64, sha256_fields};
use crate::ingest::{Rejection, VqaRecord};
use crate::jsonx;
use crate::message::ChatMessage;
use crate::templates;

/// Instruction style chosen for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstructionVariant {
    AttributeBool,
    AttributeGeneration,
    CountBool,
    CountGeneration,
    LocationReplacement,
    BlackboardCaptionOcr,
    BlackboardMath,
    BlackboardMultichoice,
    KnowledgePassthrough,
}

impl InstructionVariant {
    pub fn label(&self) -> &'static str {
        match self {
            Self::AttributeBool => "attribute-bool",
            Self::AttributeGeneration => "attribute-generation",
            Self::CountBool => "count-bool",
            Self::CountGeneration => "count-generation",
            Self::LocationReplacement => "location-replacement",
            Self::BlackboardCaptionOcr => "blackboard-caption-ocr",
            Self::BlackboardMath => "blackboard-math",
            Self::BlackboardMultichoice => "blackboard-multichoice",
            Self::KnowledgePassthrough => "knowledge-passthrough",
        }
    }

    /// Blackboard variants must render text in chalk style.
    pub fn is_blackboard(&self) -> bool {
        matches!(
            self,
            Self::BlackboardCaptionOcr | Self::BlackboardMath | Self::BlackboardMultichoice
        )
    }

    /// Bool-style variants legitimately embed the reference answer as a
    /// conditional hypothesis, so the leakage check exempts them.
    pub fn embeds_reference_answer(&self) -> bool {
        matches!(self, Self::AttributeBool | Self::CountBool)
    }

    /// Variants whose template consumes `process_answer` in the user message.
    pub fn consumes_process_answer(&self) -> bool {
        !matches!(
            self,
            Self::BlackboardCaptionOcr | Self::BlackboardMultichoice | Self::KnowledgePassthrough
        )
    }

    fn template(&self) -> &'static str {
        match self {
            Self::AttributeBool => templates::TRANSFORM_ATTRIBUTE_BOOL,
            Self::AttributeGeneration => templates::TRANSFORM_ATTRIBUTE_GENERATION,
            Self::CountBool => templates::TRANSFORM_COUNT_BOOL,
            Self::CountGeneration => templates::TRANSFORM_COUNT_GENERATION,
            Self::LocationReplacement => templates::TRANSFORM_LOCATION,
            Self::BlackboardCaptionOcr => templates::TRANSFORM_CAPTION_OCR,
            Self::BlackboardMath => templates::TRANSFORM_MATH,
            Self::BlackboardMultichoice => templates::TRANSFORM_MULTI_CHOICE,
            Self::KnowledgePassthrough => "",
        }
    }
}

impl fmt::Display for InstructionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A classified record plus its synthesized edit instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    #[serde(flatten)]
    pub classified: ClassifiedRecord,
    pub edit_instruction: String,
    pub variant: InstructionVariant,
    /// Pre-made target image for knowledge passthrough records.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_image_path: Option<String>,
}

/// Deterministically route a category to an instruction variant.
///
/// Attribute and count categories split 50/50 between their bool and
/// generation styles, keyed on (seed, record id) so the choice is stable
/// across runs and platforms.
pub fn select_variant(
    category: EditCategory,
    seed: u64,
    record_id: &str,
) -> Result<InstructionVariant> {
    let coin = seeded_hash64(seed, &["variant", record_id]) & 1 == 0;
    Ok(match category {
        EditCategory::Shape | EditCategory::Color => {
            if coin {
                InstructionVariant::AttributeBool
            } else {
                InstructionVariant::AttributeGeneration
            }
        }
        EditCategory::Count => {
            if coin {
                InstructionVariant::CountBool
            } else {
                InstructionVariant::CountGeneration
            }
        }
        EditCategory::Location => InstructionVariant::LocationReplacement,
        EditCategory::Caption | EditCategory::Ocr => InstructionVariant::BlackboardCaptionOcr,
        EditCategory::Math => InstructionVariant::BlackboardMath,
        EditCategory::MultiChoice | EditCategory::Bool => {
            InstructionVariant::BlackboardMultichoice
        }
        EditCategory::Others | EditCategory::Knowledge => {
            return Err(ForgeError::Routing(category.label().into()))
        }
    })
}

/// Render the transformation request for one record.
///
/// System message is the per-variant template, byte for byte. The user
/// message mirrors the templates' own `Input:` layout and includes
/// `process_answer` only when the template consumes it.
pub fn render_transform_prompt(
    record: &ClassifiedRecord,
    variant: InstructionVariant,
) -> Vec<ChatMessage> {
    let user = if variant.consumes_process_answer() {
        format!(
            "Input: {{task_category: '{}', original_question: '{}', process_answer: '{}'}}\nOutput:",
            record.task_category, record.record.original_question, record.process_answer
        )
    } else {
        format!(
            "Input: {{task_category: '{}', original_question: '{}'}}\nOutput:",
            record.task_category, record.record.original_question
        )
    };
    vec![ChatMessage::system(variant.template()), ChatMessage::user(user)]
}

/// Extract the `edit_instruction` string from a transformation reply.
pub fn parse_instruction_response(text: &str) -> Result<String> {
    let value = jsonx::first_json_object(text)?;
    let instruction = jsonx::required_str(&value, "edit_instruction")?;
    if instruction.trim().is_empty() {
        return Err(ForgeError::Parse("empty edit_instruction".into()));
    }
    Ok(instruction.to_string())
}

/// Leakage verdict; a `Fail` is data, not an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Leakage {
    Pass,
    Fail { token: String },
}

impl Leakage {
    pub fn is_pass(&self) -> bool {
        matches!(self, Leakage::Pass)
    }
}

/// The final-answer token the instruction must not reveal.
///
/// For math answers the token is whatever follows the last `final answer is`
/// anchor (punctuation-trimmed); full reasoning text would otherwise flag
/// every shared numeral. Other categories use the whole trimmed answer.
pub fn final_answer_token(category: EditCategory, process_answer: &str) -> String {
    if category == EditCategory::Math {
        if let Some(pos) = process_answer.rfind("final answer is") {
            let tail = &process_answer[pos + "final answer is".len()..];
            return tail
                .trim()
                .trim_end_matches(['.', ',', '!', '?'])
                .trim()
                .to_string();
        }
    }
    process_answer.trim().to_string()
}

/// Check an instruction for answer leakage.
///
/// Fails when the final-answer token occurs case-insensitively in the
/// instruction, except for the bool-style variants whose templates plant the
/// reference answer on purpose.
pub fn check_leakage(
    instruction: &str,
    record: &ClassifiedRecord,
    variant: InstructionVariant,
) -> Leakage {
    if variant.embeds_reference_answer() {
        return Leakage::Pass;
    }
    let token = final_answer_token(record.task_category, &record.process_answer);
    if token.is_empty() {
        return Leakage::Pass;
    }
    if instruction.to_lowercase().contains(&token.to_lowercase()) {
        Leakage::Fail { token }
    } else {
        Leakage::Pass
    }
}

/// Machine-readable reasons a generated instruction can be rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationIssue {
    MissingChalkStyle,
    MissingAesthetics,
}

impl ValidationIssue {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MissingChalkStyle => "missing-chalk-style",
            Self::MissingAesthetics => "missing-aesthetics",
        }
    }
}

/// Result of structural validation; warnings never fail a record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Validation {
    pub failures: Vec<ValidationIssue>,
    pub warnings: Vec<ValidationIssue>,
}

impl Validation {
    pub fn is_pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Clause markers that satisfy the aesthetics directive.
pub const AESTHETIC_MARKERS: [&str; 3] = ["refine the image", "enhance", "aesthetic"];

fn has_aesthetics_clause(instruction: &str) -> bool {
    let lower = instruction.to_lowercase();
    AESTHETIC_MARKERS.iter().any(|m| lower.contains(m))
}

/// Validate format constraints for one instruction.
///
/// Blackboard variants must carry the case-sensitive `Chalk-style` token.
/// Attribute, count, and location variants must end with an aesthetics
/// clause; on blackboard variants a missing clause is only a warning since
/// their templates carry no such directive. Knowledge passthrough is exempt.
pub fn validate_instruction(instruction: &str, variant: InstructionVariant) -> Validation {
    let mut v = Validation::default();
    if variant == InstructionVariant::KnowledgePassthrough {
        return v;
    }
    if variant.is_blackboard() {
        if !instruction.contains("Chalk-style") {
            v.failures.push(ValidationIssue::MissingChalkStyle);
        }
        if !has_aesthetics_clause(instruction) {
            v.warnings.push(ValidationIssue::MissingAesthetics);
        }
    } else if !has_aesthetics_clause(instruction) {
        v.failures.push(ValidationIssue::MissingAesthetics);
    }
    v
}

/// One line of the knowledge-subset input file.
#[derive(Debug, Deserialize)]
struct KnowledgeLine {
    edit_instruction: Option<String>,
    image_path: Option<String>,
    target_image_path: Option<String>,
}

/// Outcome of merging the knowledge subset.
#[derive(Debug, Default)]
pub struct KnowledgeOutcome {
    pub records: Vec<InstructionRecord>,
    pub rejections: Vec<Rejection>,
    pub lines_read: usize,
}

/// Merge externally sourced instruction/image triples.
///
/// Records enter the pipeline as already-transformed knowledge records with
/// the `-` placeholder for question and answers. Records carrying a target
/// image additionally skip generation.
pub fn merge_knowledge_subset(path: &Path, image_root: &Path) -> Result<KnowledgeOutcome> {
    let file = File::open(path).map_err(|e| ForgeError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut outcome = KnowledgeOutcome::default();

    for (idx, line) in reader.lines().enumerate() {
        let line_number = idx + 1;
        let line = line.map_err(|e| ForgeError::io(path, e))?;
        outcome.lines_read += 1;
        match parse_knowledge_line(&line, image_root) {
            Ok(record) => outcome.records.push(record),
            Err(reason) => outcome.rejections.push(Rejection {
                line_number,
                reason,
            }),
        }
    }
    Ok(outcome)
}

fn parse_knowledge_line(
    line: &str,
    image_root: &Path,
) -> std::result::Result<InstructionRecord, String> {
    if line.trim().is_empty() {
        return Err("empty line".into());
    }
    let raw: KnowledgeLine =
        serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    let instruction = raw
        .edit_instruction
        .filter(|s| !s.trim().is_empty())
        .ok_or("missing field `edit_instruction`")?;
    let image_path = raw
        .image_path
        .filter(|s| !s.trim().is_empty())
        .ok_or("missing field `image_path`")?;

    if !image_root.join(image_path.trim()).is_file() {
        return Err(format!("image file not found: {}", image_path.trim()));
    }
    let target = match raw.target_image_path {
        Some(t) if !t.trim().is_empty() => {
            if !image_root.join(t.trim()).is_file() {
                return Err(format!("target image file not found: {}", t.trim()));
            }
            Some(t.trim().to_string())
        }
        _ => None,
    };

    let id = sha256_fields(&[
        "knowledge",
        instruction.trim(),
        image_path.trim(),
        target.as_deref().unwrap_or(""),
    ])[..32]
        .to_string();

    Ok(InstructionRecord {
        classified: ClassifiedRecord {
            record: VqaRecord {
                id,
                original_question: "-".into(),
                original_answer: "-".into(),
                image_path: image_path.trim().to_string(),
                source_dataset: "knowledge".into(),
            },
            task_category: EditCategory::Knowledge,
            process_answer: "-".into(),
        },
        edit_instruction: instruction.trim().to_string(),
        variant: InstructionVariant::KnowledgePassthrough,
        target_image_path: target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classified(category: EditCategory, question: &str, pa: &str) -> ClassifiedRecord {
        ClassifiedRecord {
            record: VqaRecord {
                id: "r1".into(),
                original_question: question.into(),
                original_answer: pa.into(),
                image_path: "img.png".into(),
                source_dataset: String::new(),
            },
            task_category: category,
            process_answer: pa.into(),
        }
    }

    #[test]
    fn math_always_routes_to_blackboard_math() {
        for seed in [0u64, 1, 99] {
            for id in ["a", "b", "c"] {
                assert_eq!(
                    select_variant(EditCategory::Math, seed, id).unwrap(),
                    InstructionVariant::BlackboardMath
                );
            }
        }
    }

    #[test]
    fn variant_selection_is_deterministic() {
        let a = select_variant(EditCategory::Shape, 42, "rec-1").unwrap();
        let b = select_variant(EditCategory::Shape, 42, "rec-1").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn attribute_split_is_roughly_even() {
        let mut bool_count = 0usize;
        let n = 10_000;
        for i in 0..n {
            let v = select_variant(EditCategory::Shape, 7, &format!("rec-{i}")).unwrap();
            if v == InstructionVariant::AttributeBool {
                bool_count += 1;
            }
        }
        let fraction = bool_count as f64 / n as f64;
        assert!(
            (fraction - 0.5).abs() <= 0.02,
            "attribute-bool fraction {fraction} out of tolerance"
        );
    }

    #[test]
    fn routing_rejects_others_and_knowledge() {
        assert!(select_variant(EditCategory::Others, 0, "x").is_err());
        assert!(select_variant(EditCategory::Knowledge, 0, "x").is_err());
    }

    #[test]
    fn bool_and_multichoice_share_the_multichoice_template() {
        assert_eq!(
            select_variant(EditCategory::Bool, 3, "x").unwrap(),
            InstructionVariant::BlackboardMultichoice
        );
        assert_eq!(
            select_variant(EditCategory::MultiChoice, 3, "x").unwrap(),
            InstructionVariant::BlackboardMultichoice
        );
    }

    #[test]
    fn attribute_bool_prompt_contains_conditional_marker() {
        let r = classified(EditCategory::Shape, "What shape is it?", "cube");
        let messages = render_transform_prompt(&r, InstructionVariant::AttributeBool);
        assert!(messages[0]
            .text()
            .contains("Use conditional branches in the ORIGINAL scene"));
        assert!(messages[1].text().contains("process_answer: 'cube'"));
    }

    #[test]
    fn math_prompt_contains_blackboard_marker() {
        let r = classified(EditCategory::Math, "Compute x.", "final answer is 3");
        let messages = render_transform_prompt(&r, InstructionVariant::BlackboardMath);
        assert!(messages[0].text().contains("Generate a close-up of a blackboard"));
    }

    #[test]
    fn caption_prompt_omits_process_answer() {
        let r = classified(EditCategory::Caption, "Describe the image.", "a long caption");
        let messages = render_transform_prompt(&r, InstructionVariant::BlackboardCaptionOcr);
        assert!(!messages[1].text().contains("a long caption"));
        assert!(!messages[1].text().contains("process_answer"));
    }

    #[test]
    fn parse_extracts_instruction() {
        let text = r#"{"edit_instruction": "Identify the shape of the cyan object and refine."}"#;
        assert!(parse_instruction_response(text)
            .unwrap()
            .starts_with("Identify the shape of the cyan object"));
    }

    #[test]
    fn parse_rejects_empty_instruction() {
        assert!(parse_instruction_response(r#"{"edit_instruction": ""}"#).is_err());
        assert!(parse_instruction_response("no json").is_err());
    }

    #[test]
    fn math_token_uses_final_answer_anchor() {
        let pa = "Long derivation ... Therefore the final answer is 84.72.";
        assert_eq!(final_answer_token(EditCategory::Math, pa), "84.72");
    }

    #[test]
    fn math_without_anchor_falls_back_to_full_answer() {
        let pa = "The value is the coefficient of x^27.";
        assert_eq!(final_answer_token(EditCategory::Math, pa), pa);
    }

    #[test]
    fn leakage_detects_planted_math_token() {
        let r = classified(
            EditCategory::Math,
            "Compute the perimeter.",
            "Steps ... Therefore the final answer is 84.72.",
        );
        let leaked = "Write the perimeter, which is 84.72, on the board.";
        assert!(matches!(
            check_leakage(leaked, &r, InstructionVariant::BlackboardMath),
            Leakage::Fail { .. }
        ));
        let clean = "Solve the problem and write the result on the board.";
        assert!(check_leakage(clean, &r, InstructionVariant::BlackboardMath).is_pass());
    }

    #[test]
    fn bool_variants_are_exempt_from_leakage() {
        let r = classified(EditCategory::Shape, "What shape is it?", "cube");
        let instr = "If the shape is cube, changing the shape into clinder.";
        assert!(check_leakage(instr, &r, InstructionVariant::AttributeBool).is_pass());
        // The same instruction under the generation variant leaks.
        assert!(!check_leakage(instr, &r, InstructionVariant::AttributeGeneration).is_pass());
    }

    #[test]
    fn leakage_is_case_insensitive() {
        let r = classified(EditCategory::Color, "What color?", "Purple");
        let instr = "Add a purple halo. Refine the image.";
        assert!(!check_leakage(instr, &r, InstructionVariant::AttributeGeneration).is_pass());
    }

    #[test]
    fn blackboard_without_chalk_fails() {
        let v = validate_instruction(
            "Write the answer on a whiteboard.",
            InstructionVariant::BlackboardMath,
        );
        assert_eq!(v.failures, vec![ValidationIssue::MissingChalkStyle]);
    }

    #[test]
    fn chalk_token_is_case_sensitive() {
        let v = validate_instruction(
            "Write it in chalk-style font.",
            InstructionVariant::BlackboardMath,
        );
        assert!(!v.is_pass());
    }

    #[test]
    fn attribute_without_aesthetics_fails() {
        let v = validate_instruction(
            "Identify the shape and add a ring.",
            InstructionVariant::AttributeGeneration,
        );
        assert_eq!(v.failures, vec![ValidationIssue::MissingAesthetics]);
    }

    #[test]
    fn blackboard_missing_aesthetics_is_only_a_warning() {
        let v = validate_instruction(
            "Write it into a blackboard with 'Chalk-style' font.",
            InstructionVariant::BlackboardMultichoice,
        );
        assert!(v.is_pass());
        assert_eq!(v.warnings, vec![ValidationIssue::MissingAesthetics]);
    }

    #[test]
    fn knowledge_passthrough_is_exempt() {
        let v = validate_instruction("anything", InstructionVariant::KnowledgePassthrough);
        assert!(v.is_pass() && v.warnings.is_empty());
    }

    #[test]
    fn merge_knowledge_handles_empty_and_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("src.png"), b"png").unwrap();
        std::fs::write(dir.path().join("tgt.png"), b"png").unwrap();
        let path = dir.path().join("knowledge.jsonl");

        std::fs::write(&path, "").unwrap();
        let out = merge_knowledge_subset(&path, dir.path()).unwrap();
        assert!(out.records.is_empty() && out.rejections.is_empty());

        std::fs::write(
            &path,
            concat!(
                r#"{"edit_instruction":"Swap the lantern for a globe.","image_path":"src.png","target_image_path":"tgt.png"}"#,
                "\n",
                r#"{"image_path":"src.png"}"#,
                "\n",
                r#"{"edit_instruction":"No image here."}"#,
                "\n",
            ),
        )
        .unwrap();
        let out = merge_knowledge_subset(&path, dir.path()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejections.len(), 2);
        let r = &out.records[0];
        assert_eq!(r.variant, InstructionVariant::KnowledgePassthrough);
        assert_eq!(r.classified.task_category, EditCategory::Knowledge);
        assert_eq!(r.classified.process_answer, "-");
        assert_eq!(r.target_image_path.as_deref(), Some("tgt.png"));
    }
}
