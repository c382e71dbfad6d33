//! Noun-phrase / entity extraction.
//!
//! The engine talks to an [`EntityExtractor`]. The built-in
//! [`HeuristicEntityExtractor`] is deterministic and offline: it returns
//! maximal runs of capitalized tokens plus lowercase one- and two-token
//! phrases that occur at least twice, each at most four tokens long.

use std::collections::HashMap;

use crate::error::ProviderError;

pub const MAX_ENTITY_TOKENS: usize = 4;
const MIN_PHRASE_OCCURRENCES: usize = 2;
const MIN_LOWERCASE_TOKEN_CHARS: usize = 3;

pub trait EntityExtractor: Send + Sync {
    fn extract(&self, text: &str) -> Result<Vec<String>, ProviderError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicEntityExtractor;

impl EntityExtractor for HeuristicEntityExtractor {
    fn extract(&self, text: &str) -> Result<Vec<String>, ProviderError> {
        Ok(extract_entities(text))
    }
}

/// Runs `extractor`, falling back to the built-in heuristic on failure.
pub fn extract_entities_with(extractor: &dyn EntityExtractor, text: &str) -> Vec<String> {
    match extractor.extract(text) {
        Ok(entities) => entities,
        Err(err) => {
            tracing::warn!(%err, "entity provider failed, using built-in heuristic");
            extract_entities(text)
        }
    }
}

/// Function words that never start, end or join an entity.
pub(crate) const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "best", "better", "between", "but", "by", "can", "could", "do", "does", "each", "every", "for",
    "from", "has", "have", "how", "i", "if", "in", "into", "is", "it", "its", "just", "more",
    "most", "my", "new", "no", "not", "of", "on", "one", "or", "our", "should", "so", "some",
    "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "those",
    "to", "too", "top", "use", "using", "very", "vs", "versus", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "why", "will", "with", "would", "you", "your",
];

pub(crate) fn is_stopword(token: &str) -> bool {
    let lower = token.to_lowercase();
    STOPWORDS.contains(&lower.as_str())
}

struct Token<'a> {
    text: &'a str,
    /// Punctuation (not just whitespace) separates this token from the previous one.
    boundary_before: bool,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut boundary = true;
    let mut start: Option<usize> = None;
    let is_word_char = |c: char| c.is_alphanumeric() || matches!(c, '+' | '#' | '\'' | '’');
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        // dots and hyphens inside a word ("Vue.js", "drag-and-drop") stay in the token
        let inner_joiner = matches!(c, '.' | '-')
            && start.is_some()
            && chars.get(i + 1).is_some_and(|(_, n)| n.is_alphanumeric());
        if is_word_char(c) || inner_joiner {
            if start.is_none() {
                start = Some(pos);
            }
        } else {
            if let Some(s) = start.take() {
                tokens.push(Token { text: &text[s..pos], boundary_before: boundary });
                boundary = false;
            }
            if !c.is_whitespace() {
                boundary = true;
            }
        }
        i += 1;
    }
    if let Some(s) = start {
        tokens.push(Token { text: &text[s..], boundary_before: boundary });
    }
    tokens
}

fn is_capitalized(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_uppercase())
        || token.chars().skip(1).any(|c| c.is_uppercase())
}

fn is_numeric(token: &str) -> bool {
    token.chars().all(|c| c.is_ascii_digit() || c == '.')
}

/// Built-in deterministic entity heuristic.
pub fn extract_entities(text: &str) -> Vec<String> {
    let tokens = tokenize(text);
    let mut out: Vec<String> = Vec::new();
    let push = |candidate: String, out: &mut Vec<String>| {
        if !candidate.is_empty() && !out.contains(&candidate) {
            out.push(candidate);
        }
    };

    // capitalized runs
    let mut run: Vec<&str> = Vec::new();
    let flush = |run: &mut Vec<&str>, out: &mut Vec<String>| {
        if !run.is_empty() && run.len() <= MAX_ENTITY_TOKENS {
            push(run.join(" "), out);
        }
        run.clear();
    };
    for token in &tokens {
        if token.boundary_before {
            flush(&mut run, &mut out);
        }
        let extends = if is_stopword(token.text) {
            false
        } else if is_capitalized(token.text) {
            true
        } else {
            // version numbers continue a run: "Angular 2"
            !run.is_empty() && is_numeric(token.text)
        };
        if extends {
            run.push(token.text);
        } else {
            flush(&mut run, &mut out);
        }
    }
    flush(&mut run, &mut out);

    // frequent lowercase phrases
    let lowercase_ok = |t: &Token<'_>| {
        !is_capitalized(t.text)
            && !is_stopword(t.text)
            && t.text.chars().count() >= MIN_LOWERCASE_TOKEN_CHARS
            && t.text.chars().all(|c| c.is_alphabetic() || c == '-')
    };
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut bump = |phrase: String| {
        let entry = counts.entry(phrase.clone()).or_insert(0);
        if *entry == 0 {
            order.push(phrase);
        }
        *entry += 1;
    };
    for (i, token) in tokens.iter().enumerate() {
        if !lowercase_ok(token) {
            continue;
        }
        bump(token.text.to_string());
        if let Some(next) = tokens.get(i + 1) {
            if !next.boundary_before && lowercase_ok(next) {
                bump(format!("{} {}", token.text, next.text));
            }
        }
    }
    for phrase in order {
        if counts[&phrase] >= MIN_PHRASE_OCCURRENCES {
            push(phrase, &mut out);
        }
    }
    out
}
