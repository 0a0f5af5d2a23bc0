//! Small text utilities shared by embedders and lexical metrics.

/// Lowercased alphanumeric word tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Whitespace-delimited word count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Rough token estimate: words × 1.3, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    (word_count(text) as f64 * 1.3).ceil() as usize
}
