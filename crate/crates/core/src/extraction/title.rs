//! "A vs B" splitting of titles and opening paragraphs.

use std::sync::OnceLock;

use regex::Regex;

fn vs_separator() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(?:^|\s)(?:vs\.?|v\.s\.?|versus)(?:\s|$)").expect("valid regex")
    })
}

/// Subtitle separators cut from the final segment, first occurrence wins.
const SUBTITLE_SEPARATORS: &[&str] = &[":", " — ", " – ", " - ", "?"];

/// Splits a title on `vs` / `vs.` / `v.s.` / `versus` (case-insensitive,
/// whitespace-delimited). Returns the trimmed segments in title order, or an
/// empty list when fewer than two non-empty segments result.
pub fn extract_options_from_title(title: &str) -> Vec<String> {
    let separator = vs_separator();
    if !separator.is_match(title) {
        return Vec::new();
    }
    let mut segments: Vec<String> = separator.split(title).map(str::to_string).collect();
    if let Some(last) = segments.last_mut() {
        let cut = SUBTITLE_SEPARATORS
            .iter()
            .filter_map(|sep| last.find(sep))
            .min();
        if let Some(cut) = cut {
            last.truncate(cut);
        }
    }
    let segments: Vec<String> = segments
        .into_iter()
        .map(|s| trim_segment(&s))
        .filter(|s| !s.is_empty())
        .collect();
    if segments.len() < 2 {
        return Vec::new();
    }
    segments
}

fn trim_segment(segment: &str) -> String {
    segment
        .trim()
        .trim_matches(|c: char| matches!(c, ',' | ';' | '"' | '\'' | '“' | '”'))
        .trim()
        .to_string()
}

/// Finds `X vs Y` comparisons inside running prose. Only the capitalized
/// token runs directly adjacent to each separator are kept, so sentence
/// context around the comparison is not swallowed into option names.
pub fn extract_options_from_prose(text: &str) -> Vec<String> {
    let separator = vs_separator();
    let mut out: Vec<String> = Vec::new();
    let matches: Vec<_> = separator.find_iter(text).collect();
    for m in &matches {
        let left = adjacent_name(&text[..m.start()], Side::Left);
        let right = adjacent_name(&text[m.end()..], Side::Right);
        if let (Some(left), Some(right)) = (left, right) {
            for name in [left, right] {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

const MAX_NAME_TOKENS: usize = 3;

fn adjacent_name(fragment: &str, side: Side) -> Option<String> {
    let tokens: Vec<&str> = fragment.split_whitespace().collect();
    let ordered: Box<dyn Iterator<Item = &&str>> = match side {
        Side::Left => Box::new(tokens.iter().rev()),
        Side::Right => Box::new(tokens.iter()),
    };
    let mut picked: Vec<String> = Vec::new();
    for (i, raw) in ordered.enumerate() {
        if picked.len() == MAX_NAME_TOKENS {
            break;
        }
        let token = raw.trim_matches(|c: char| !c.is_alphanumeric() && c != '+' && c != '#');
        if token.is_empty() || !looks_like_name(token) {
            break;
        }
        let boundary = match side {
            Side::Left => raw.ends_with([',', ':', ';', '.', '?', '!', ')']),
            Side::Right => raw.starts_with(['(', '"']),
        };
        if boundary && i > 0 {
            break;
        }
        picked.push(token.to_string());
        let stop_after = match side {
            Side::Right => raw.ends_with([',', ':', ';', '.', '?', '!', ')']),
            Side::Left => raw.starts_with(['(', '"']),
        };
        if stop_after {
            break;
        }
    }
    if picked.is_empty() {
        return None;
    }
    if matches!(side, Side::Left) {
        picked.reverse();
    }
    Some(picked.join(" "))
}

fn looks_like_name(token: &str) -> bool {
    let first = token.chars().next();
    first.is_some_and(|c| c.is_uppercase())
        || token.chars().skip(1).any(|c| c.is_uppercase())
        || token.contains(['.', '+', '#'])
}
