//! Prompt template resources.
//!
//! Templates ship verbatim in the repository and are embedded at compile
//! time. Their hashes become part of the run's config hash so a resumed run
//! refuses to continue if any prompt text drifted.

use std::collections::BTreeMap;

use crate::hashing::sha256_hex;

pub const CLASSIFY_SYSTEM: &str = include_str!("../templates/classify_system.txt");
pub const TRANSFORM_ATTRIBUTE_BOOL: &str =
    include_str!("../templates/transform_attribute_bool.txt");
pub const TRANSFORM_ATTRIBUTE_GENERATION: &str =
    include_str!("../templates/transform_attribute_generation.txt");
pub const TRANSFORM_COUNT_BOOL: &str = include_str!("../templates/transform_count_bool.txt");
pub const TRANSFORM_COUNT_GENERATION: &str =
    include_str!("../templates/transform_count_generation.txt");
pub const TRANSFORM_CAPTION_OCR: &str = include_str!("../templates/transform_caption_ocr.txt");
pub const TRANSFORM_MULTI_CHOICE: &str = include_str!("../templates/transform_multi_choice.txt");
pub const TRANSFORM_LOCATION: &str = include_str!("../templates/transform_location.txt");
pub const TRANSFORM_MATH: &str = include_str!("../templates/transform_math.txt");
pub const FILTER_IMAGE_QUALITY: &str = include_str!("../templates/filter_image_quality.txt");
pub const FILTER_INSTRUCTION_FOLLOWING: &str =
    include_str!("../templates/filter_instruction_following.txt");

/// Every shipped template, in a fixed order.
pub fn all() -> [(&'static str, &'static str); 11] {
    [
        ("classify_system", CLASSIFY_SYSTEM),
        ("transform_attribute_bool", TRANSFORM_ATTRIBUTE_BOOL),
        ("transform_attribute_generation", TRANSFORM_ATTRIBUTE_GENERATION),
        ("transform_count_bool", TRANSFORM_COUNT_BOOL),
        ("transform_count_generation", TRANSFORM_COUNT_GENERATION),
        ("transform_caption_ocr", TRANSFORM_CAPTION_OCR),
        ("transform_multi_choice", TRANSFORM_MULTI_CHOICE),
        ("transform_location", TRANSFORM_LOCATION),
        ("transform_math", TRANSFORM_MATH),
        ("filter_image_quality", FILTER_IMAGE_QUALITY),
        ("filter_instruction_following", FILTER_INSTRUCTION_FOLLOWING),
    ]
}

/// Name -> SHA-256 of each template, folded into the config hash.
pub fn hashes() -> BTreeMap<String, String> {
    all()
        .iter()
        .map(|(name, text)| (name.to_string(), sha256_hex(text.as_bytes())))
        .collect()
}
