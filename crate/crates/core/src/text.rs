//! Text normalization shared by extraction, association and grouping.

use sha2::{Digest, Sha256};

/// Collapses every run of whitespace into a single space and trims both ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercases, replaces punctuation with spaces and collapses whitespace.
///
/// `+` and `#` survive so that names such as `C++` and `C#` stay distinct
/// from `C`.
pub fn normalize_name(text: &str) -> String {
    let mapped: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| {
            if c.is_alphanumeric() || c == '+' || c == '#' {
                c
            } else {
                ' '
            }
        })
        .collect();
    collapse_whitespace(&mapped)
}

/// Key used for candidate deduplication: the normalized name with a naive
/// plural `s` stripped from the final token when that token is longer than
/// three characters.
pub fn dedup_key(text: &str) -> String {
    let normalized = normalize_name(text);
    let mut tokens: Vec<&str> = normalized.split(' ').collect();
    if let Some(last) = tokens.last_mut() {
        if last.chars().count() > 3 && last.ends_with('s') && !last.ends_with("ss") {
            *last = &last[..last.len() - 1];
        }
    }
    tokens.join(" ")
}

/// Whole-word containment test over two already-normalized strings.
pub fn contains_phrase(normalized_haystack: &str, normalized_needle: &str) -> bool {
    find_phrase(normalized_haystack, normalized_needle).is_some()
}

/// Byte offset of the first whole-phrase occurrence of `normalized_needle`.
pub fn find_phrase(normalized_haystack: &str, normalized_needle: &str) -> Option<usize> {
    if normalized_needle.is_empty() || normalized_haystack.len() < normalized_needle.len() {
        return None;
    }
    normalized_haystack
        .match_indices(normalized_needle)
        .map(|(start, _)| start)
        .find(|&start| {
            let end = start + normalized_needle.len();
            let before_ok = start == 0 || normalized_haystack.as_bytes()[start - 1] == b' ';
            let after_ok =
                end == normalized_haystack.len() || normalized_haystack.as_bytes()[end] == b' ';
            before_ok && after_ok
        })
}

/// Case-sensitive whole-word containment over raw text. Word boundaries are
/// any non-alphanumeric characters.
pub fn contains_word_exact(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    haystack.match_indices(needle).any(|(start, _)| {
        let end = start + needle.len();
        let before_ok = haystack[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = haystack[end..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_alphanumeric());
        before_ok && after_ok
    })
}

/// Hex prefix of the SHA-256 digest over the given parts, separated by NUL.
pub fn short_hash(parts: &[&str], hex_len: usize) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(hex_len);
    for byte in digest.iter() {
        if out.len() >= hex_len {
            break;
        }
        out.push_str(&format!("{byte:02x}"));
    }
    out.truncate(hex_len);
    out
}
