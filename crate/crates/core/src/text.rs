//! Text normalization shared by duplicate detection in corpora and in model responses.

/// Trims, collapses every whitespace run to a single space and casefolds.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}
