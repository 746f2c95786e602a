//! Small text utilities shared by routing, retrieval, scoring and the
//! fingerprint check.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;

/// Lowercase alphanumeric tokens, in order of appearance.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(|t| t.to_lowercase()).collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokens(text).into_iter().collect()
}

const STOPWORDS: &[&str] = &[
    "the", "and", "with", "for", "its", "are", "was", "has", "that", "this", "from", "into", "onto", "of", "on", "in",
    "to", "a", "an", "at", "by", "is", "it", "or", "as",
];

/// Content words: tokens of three or more characters that are not stopwords.
pub fn content_words(text: &str) -> BTreeSet<String> {
    tokens(text).into_iter().filter(|t| t.chars().count() >= 3 && !STOPWORDS.contains(&t.as_str())).collect()
}

/// Whether `phrase` occurs as a contiguous token run inside `haystack`.
pub fn contains_phrase(haystack: &[String], phrase: &str) -> bool {
    let needle = tokens(phrase);
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Lowercase with every whitespace run collapsed to a single space.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&word.to_lowercase());
    }
    out
}

/// Stable 64-bit FNV-1a hash.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(bytes);
    hasher.finish()
}

/// Truncate to at most `max` characters on a char boundary.
pub fn truncate(text: &str, max: usize) -> &str {
    match text.char_indices().nth(max) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phrase_matching_is_token_contiguous() {
        let hay = tokens("Search for the satellite, then approach it");
        assert!(contains_phrase(&hay, "then approach"));
        assert!(!contains_phrase(&hay, "approach then"));
        assert!(!contains_phrase(&hay, "sat"));
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize("  Below  5 m\tRANGE \n"), "below 5 m range");
    }

    #[test]
    fn fnv_matches_reference_vector() {
        // FNV-1a 64 of "a"
        assert_eq!(stable_hash(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn truncate_respects_char_boundaries() {
        assert_eq!(truncate("héllo", 2), "hé");
        assert_eq!(truncate("ab", 5), "ab");
    }
}
