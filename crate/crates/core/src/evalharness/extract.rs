use crate::modgen::ModClass;

const CLOSING_TAGS: [&str; 3] = ["</think>", "</thinking>", "</reasoning>"];
const OPENING_TAGS: [&str; 3] = ["<think>", "<thinking>", "<reasoning>"];

/// Byte offset just past the last recognized closing reasoning tag.
fn after_last_closing_tag(lower: &str) -> Option<usize> {
    CLOSING_TAGS
        .iter()
        .filter_map(|t| lower.rfind(t).map(|i| i + t.len()))
        .max()
}

/// The region of `raw` that may hold the final answer. `None` if a reasoning
/// block was opened and never closed.
fn answer_region(raw: &str) -> Option<&str> {
    let lower = raw.to_ascii_lowercase();
    match after_last_closing_tag(&lower) {
        Some(end) => Some(&raw[end..]),
        None if OPENING_TAGS.iter().any(|t| lower.contains(t)) => None,
        None => Some(raw),
    }
}

/// Finds the class named last in `raw`. Names match case-insensitively as
/// whole runs of ASCII letters and digits, so `LOOK` never counts as OOK and
/// `16PAM` never counts as 4PAM. Text inside a closed reasoning block is
/// ignored.
pub fn extract_class(raw: &str) -> Option<ModClass> {
    let region = answer_region(raw)?;
    region
        .rsplit(|c: char| !c.is_ascii_alphanumeric())
        .filter(|tok| !tok.is_empty() && tok.len() <= 5)
        .find_map(|tok| ModClass::ALL.iter().copied().find(|c| c.as_str().eq_ignore_ascii_case(tok)))
}

/// [`extract_class`] on arbitrary bytes; invalid UTF-8 is replaced first.
pub fn extract_class_bytes(raw: &[u8]) -> Option<ModClass> {
    extract_class(&String::from_utf8_lossy(raw))
}
