use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use regex::Regex;

use super::entities::{extract_entities_with, EntityExtractor, MAX_ENTITY_TOKENS};
use super::suggest::AlternativesSuggester;
use super::title::{extract_options_from_prose, extract_options_from_title};
use super::{
    dedupe_candidates, Candidate, CriterionCandidate, CriterionSource, OptionCandidate,
    OptionSource, Provenance,
};
use crate::page_model::{opening_paragraphs, BlockKind, PageSnapshot};
use crate::text::{contains_phrase, contains_word_exact, dedup_key, normalize_name};

pub const DEFAULT_REPEATED_MENTION_THRESHOLD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractionConfig {
    /// Distinct content blocks that must mention an entity for it to count
    /// as repeatedly mentioned.
    pub repeated_mention_threshold: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self { repeated_mention_threshold: DEFAULT_REPEATED_MENTION_THRESHOLD }
    }
}

#[derive(Clone, Copy)]
pub struct Extractors<'a> {
    pub entities: &'a dyn EntityExtractor,
    pub suggester: &'a dyn AlternativesSuggester,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractedCandidates {
    pub options: Vec<OptionCandidate>,
    pub criteria: Vec<CriterionCandidate>,
}

/// Outcome of the option corroboration tests for one entity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corroboration {
    pub is_option: bool,
    pub sources: BTreeSet<OptionSource>,
}

/// Section headers that organize an article rather than name a criterion.
const GENERIC_HEADERS: &[&str] = &[
    "introduction", "intro", "conclusion", "conclusions", "summary", "overview", "contents",
    "table of contents", "references", "related", "related posts", "related articles",
    "comments", "final thoughts", "verdict", "wrapping up", "tl dr", "tldr", "faq",
    "about", "about the author", "share", "leave a reply", "further reading", "see also",
    "library", "framework", "name", "option", "tool", "package", "product", "feature",
    "navigation", "menu", "footer", "sidebar", "subscribe", "newsletter",
];

fn header_numbering() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d+(?:\.\d+)*[.)]?|[ivxIVX]+[.)])\s+").expect("valid regex"))
}

const CLAUSE_SEPARATORS: &[&str] = &[":", " — ", " – ", " - ", "|", ";", "?"];

fn split_clauses(header: &str) -> Vec<String> {
    let mut parts = vec![header.to_string()];
    for sep in CLAUSE_SEPARATORS {
        parts = parts
            .iter()
            .flat_map(|p| p.split(sep).map(str::to_string).collect::<Vec<_>>())
            .collect();
    }
    parts
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

fn is_generic_header(text: &str) -> bool {
    let normalized = normalize_name(text);
    GENERIC_HEADERS.contains(&normalized.as_str())
        || normalized
            .split(' ')
            .all(|t| super::entities::is_stopword(t) || t.chars().all(|c| c.is_ascii_digit()))
}

/// Removes every whole-word mention of a known option name from a header
/// segment ("Swiper Performance" -> "Performance").
fn strip_option_names(segment: &str, option_names: &[String]) -> String {
    let mut tokens: Vec<String> = segment.split_whitespace().map(str::to_string).collect();
    for name in option_names {
        let name_tokens: Vec<String> = normalize_name(name).split(' ').map(str::to_string).collect();
        if name_tokens.is_empty() || name_tokens[0].is_empty() {
            continue;
        }
        let mut i = 0;
        while i + name_tokens.len() <= tokens.len() {
            let window: Vec<String> = tokens[i..i + name_tokens.len()]
                .iter()
                .map(|t| normalize_name(t))
                .collect();
            if window == name_tokens {
                tokens.drain(i..i + name_tokens.len());
            } else {
                i += 1;
            }
        }
    }
    tokens
        .join(" ")
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '+' && c != '#')
        .to_string()
}

/// Criterion candidates from one page's section headers and table headers.
/// Headers naming a known option are excluded.
pub fn extract_criteria(
    page: &PageSnapshot,
    option_names: &[String],
    entities: &dyn EntityExtractor,
) -> Vec<CriterionCandidate> {
    let option_keys: BTreeSet<String> = option_names.iter().map(|n| dedup_key(n)).collect();
    let title_norm = normalize_name(&page.title);
    let mut out = Vec::new();

    let mut consider = |header: &str, source: CriterionSource, provenance: Provenance| {
        let header = header_numbering().replace(header, "").to_string();
        if normalize_name(&header) == title_norm || !extract_options_from_title(&header).is_empty() {
            return;
        }
        for clause in split_clauses(&header) {
            let stripped = strip_option_names(&clause, option_names);
            if stripped.is_empty() || is_generic_header(&stripped) {
                continue;
            }
            let token_count = stripped.split_whitespace().count();
            let (names, source) = if token_count <= MAX_ENTITY_TOKENS {
                (vec![stripped], source)
            } else {
                (extract_entities_with(entities, &stripped), CriterionSource::Entity)
            };
            for name in names {
                let key = dedup_key(&name);
                if key.is_empty() || option_keys.contains(&key) || is_generic_header(&name) {
                    continue;
                }
                out.push(Candidate::new(&name, source, provenance.clone(), page.captured_at));
            }
        }
    };

    for block in page.headings() {
        consider(
            &block.text,
            CriterionSource::SectionHeader,
            Provenance::block(&page.page_id, &block.block_id),
        );
    }
    for header in &page.table_headers {
        let row = page.blocks.iter().find(|b| {
            b.kind == BlockKind::TableCellGroup && b.html.contains("<th") && b.text.contains(header.as_str())
        });
        let provenance = match row {
            Some(b) => Provenance::block(&page.page_id, &b.block_id),
            None => Provenance::page(&page.page_id),
        };
        consider(header, CriterionSource::TableHeader, provenance);
    }
    dedupe_candidates(out)
}

fn mention_count(entity: &str, page: &PageSnapshot) -> usize {
    let case_sensitive = entity.chars().any(|c| c.is_uppercase());
    let normalized = normalize_name(entity);
    page.blocks
        .iter()
        .filter(|b| !b.is_heading())
        .filter(|b| {
            if case_sensitive {
                // capitalized entities only count proper-noun mentions
                contains_word_exact(&b.text, entity)
            } else {
                contains_phrase(&normalize_name(&b.text), &normalized)
            }
        })
        .count()
}

struct SuggestionCache<'a> {
    suggester: &'a dyn AlternativesSuggester,
    cache: HashMap<String, BTreeSet<String>>,
}

impl<'a> SuggestionCache<'a> {
    fn new(suggester: &'a dyn AlternativesSuggester) -> Self {
        Self { suggester, cache: HashMap::new() }
    }

    fn keys_for(&mut self, name: &str) -> &BTreeSet<String> {
        let key = dedup_key(name);
        let suggester = self.suggester;
        self.cache.entry(key).or_insert_with(|| match suggester.suggest(name) {
            Ok(list) => list.iter().map(|s| dedup_key(s)).filter(|k| !k.is_empty()).collect(),
            Err(err) => {
                tracing::warn!(%err, name, "alternatives suggester failed");
                BTreeSet::new()
            }
        })
    }
}

/// A capitalized entity that the page's own prose mostly writes in lower
/// case is a common noun picked up from title case ("Which Carousel Library").
fn reads_as_common_noun(entity: &str, page: &PageSnapshot) -> bool {
    let lower = entity.to_lowercase();
    if lower == entity {
        return false;
    }
    let (mut exact, mut lowered) = (0usize, 0usize);
    for b in page.blocks.iter().filter(|b| !b.is_heading()) {
        if contains_word_exact(&b.text, entity) {
            exact += 1;
        } else if contains_word_exact(&b.text, &lower) {
            lowered += 1;
        }
    }
    lowered > exact
}

fn title_corroborates(entity: &str, session_pages: &[&PageSnapshot], current_page: &PageSnapshot) -> bool {
    let normalized = normalize_name(entity);
    session_pages
        .iter()
        .filter(|p| p.page_id != current_page.page_id)
        .any(|p| contains_phrase(&normalize_name(&p.title), &normalized))
}

fn suggestions_corroborate(entity: &str, known_options: &[String], cache: &mut SuggestionCache<'_>) -> bool {
    let entity_key = dedup_key(entity);
    let others: Vec<&String> = known_options.iter().filter(|o| dedup_key(o) != entity_key).collect();
    if others.is_empty() {
        return false;
    }
    let for_entity = cache.keys_for(entity).clone();
    others.iter().any(|o| for_entity.contains(&dedup_key(o)))
        || others.iter().any(|o| cache.keys_for(o).contains(&entity_key))
}

/// Decides whether an entity found on `current_page` is an option. It is
/// when its name appears in another visited page's title, when it and a
/// known option suggest each other as alternatives, or when the current page
/// mentions it in at least `repeated_mention_threshold` content blocks.
pub fn corroborate_option(
    entity: &str,
    session_pages: &[&PageSnapshot],
    suggester: &dyn AlternativesSuggester,
    current_page: &PageSnapshot,
    known_options: &[String],
    repeated_mention_threshold: usize,
) -> Corroboration {
    let mut cache = SuggestionCache::new(suggester);
    corroborate_cached(entity, session_pages, &mut cache, current_page, known_options, repeated_mention_threshold)
}

fn corroborate_cached(
    entity: &str,
    session_pages: &[&PageSnapshot],
    cache: &mut SuggestionCache<'_>,
    current_page: &PageSnapshot,
    known_options: &[String],
    repeated_mention_threshold: usize,
) -> Corroboration {
    let mut sources = BTreeSet::new();
    if entity.trim().is_empty() || reads_as_common_noun(entity, current_page) {
        return Corroboration::default();
    }
    if title_corroborates(entity, session_pages, current_page) {
        sources.insert(OptionSource::EntityTitleCorroboration);
    }
    if suggestions_corroborate(entity, known_options, cache) {
        sources.insert(OptionSource::AutocompleteVs);
    }
    if mention_count(entity, current_page) >= repeated_mention_threshold {
        sources.insert(OptionSource::RepeatedMention);
    }
    Corroboration { is_option: !sources.is_empty(), sources }
}

struct EntityMention {
    name: String,
    page_index: usize,
    provenance: Provenance,
}

/// Options across all visited pages. Suggestion corroboration depends on
/// the set of known options, so entity acceptance iterates to a fixpoint.
pub fn extract_options(
    pages: &[&PageSnapshot],
    extractors: Extractors<'_>,
    config: ExtractionConfig,
) -> Vec<OptionCandidate> {
    let mut options: Vec<OptionCandidate> = Vec::new();
    for page in pages {
        for name in extract_options_from_title(&page.title) {
            options.push(Candidate::new(&name, OptionSource::TitleVs, Provenance::page(&page.page_id), page.captured_at));
        }
        for block in opening_paragraphs(page) {
            for name in extract_options_from_prose(&block.text) {
                options.push(Candidate::new(
                    &name,
                    OptionSource::TitleVs,
                    Provenance::block(&page.page_id, &block.block_id),
                    page.captured_at,
                ));
            }
        }
    }

    let mut mentions: Vec<EntityMention> = Vec::new();
    for (page_index, page) in pages.iter().enumerate() {
        let mut texts: Vec<(String, Provenance)> = vec![(page.title.clone(), Provenance::page(&page.page_id))];
        for heading in page.headings() {
            texts.push((heading.text.clone(), Provenance::block(&page.page_id, &heading.block_id)));
        }
        for header in &page.table_headers {
            texts.push((header.clone(), Provenance::page(&page.page_id)));
        }
        for (text, provenance) in texts {
            for name in extract_entities_with(extractors.entities, &text) {
                mentions.push(EntityMention { name, page_index, provenance: provenance.clone() });
            }
        }
    }

    let mut cache = SuggestionCache::new(extractors.suggester);
    let mut accepted = vec![false; mentions.len()];
    loop {
        let known: Vec<String> = dedupe_candidates(options.clone()).into_iter().map(|o| o.name).collect();
        let mut changed = false;
        for (i, mention) in mentions.iter().enumerate() {
            if accepted[i] {
                continue;
            }
            let page = pages[mention.page_index];
            let verdict = corroborate_cached(
                &mention.name,
                pages,
                &mut cache,
                page,
                &known,
                config.repeated_mention_threshold,
            );
            if verdict.is_option {
                accepted[i] = true;
                changed = true;
                let mut candidate = Candidate::new(
                    &mention.name,
                    OptionSource::EntityTitleCorroboration,
                    mention.provenance.clone(),
                    page.captured_at,
                );
                candidate.sources = verdict.sources;
                options.push(candidate);
            }
        }
        if !changed {
            break;
        }
    }
    dedupe_candidates(options)
}

/// Runs option extraction over the whole session, then criteria extraction
/// per page with the discovered option names excluded.
pub fn extract_session(
    pages: &[&PageSnapshot],
    extractors: Extractors<'_>,
    config: ExtractionConfig,
    extra_option_names: &[String],
) -> ExtractedCandidates {
    let options = extract_options(pages, extractors, config);
    let mut option_names: Vec<String> = options.iter().map(|o| o.name.clone()).collect();
    option_names.extend(extra_option_names.iter().cloned());
    let criteria = pages
        .iter()
        .flat_map(|p| extract_criteria(p, &option_names, extractors.entities))
        .collect();
    ExtractedCandidates { options, criteria: dedupe_candidates(criteria) }
}
