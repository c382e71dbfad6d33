//! Linking content blocks to options and criteria.
//!
//! Tiers, highest priority first: a verbatim mention in the block text, a
//! mention in the enclosing section headers (innermost first), a mention in
//! the page title. The first non-empty tier wins. Blocks that match no
//! option fall back to a placeholder option named after the page title.

use serde::{Deserialize, Serialize};

use crate::extraction::{candidate_id, Candidate, CandidateKind, OptionCandidate, OptionSource, Provenance, SourceTag};
use crate::page_model::{ContentBlock, PageSnapshot};
use crate::text::{contains_phrase, dedup_key, find_phrase, normalize_name};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationSource {
    Verbatim,
    SectionHeader,
    PageTitle,
    PlaceholderOption,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockKey {
    pub page_id: String,
    pub block_id: String,
}

impl BlockKey {
    pub fn new(page_id: &str, block_id: &str) -> Self {
        Self { page_id: page_id.to_string(), block_id: block_id.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockAssociation {
    pub page_id: String,
    pub block_id: String,
    pub option_ids: Vec<String>,
    pub criterion_ids: Vec<String>,
    pub option_source: AssociationSource,
    /// `None` when no criterion matched any tier.
    pub criterion_source: Option<AssociationSource>,
}

impl BlockAssociation {
    pub fn key(&self) -> BlockKey {
        BlockKey::new(&self.page_id, &self.block_id)
    }
}

/// Pre-normalized match forms of a candidate.
struct Matcher<'a> {
    id: &'a str,
    forms: Vec<String>,
}

fn matchers<S: SourceTag>(candidates: &[Candidate<S>]) -> Vec<Matcher<'_>> {
    candidates
        .iter()
        .map(|c| {
            let mut forms = vec![normalize_name(&c.name)];
            let key = dedup_key(&c.name);
            if !forms.contains(&key) {
                forms.push(key);
            }
            forms.retain(|f| !f.is_empty());
            Matcher { id: &c.id, forms }
        })
        .collect()
}

fn mentioned(matchers: &[Matcher<'_>], normalized_text: &str) -> Vec<String> {
    matchers
        .iter()
        .filter(|m| m.forms.iter().any(|f| contains_phrase(normalized_text, f)))
        .map(|m| m.id.to_string())
        .collect()
}

/// Candidates the block text names, most specific first: those its own
/// section headers also name (innermost first), then by first mention.
fn mentioned_in_block(matchers: &[Matcher<'_>], block: &ContentBlock) -> Vec<String> {
    let text = normalize_name(&block.text);
    let headers: Vec<String> = block.section_path.iter().rev().map(|h| normalize_name(h)).collect();
    let mut found: Vec<(usize, usize, usize)> = matchers
        .iter()
        .enumerate()
        .filter_map(|(i, m)| {
            let at = m.forms.iter().filter_map(|f| find_phrase(&text, f)).min()?;
            let depth = headers
                .iter()
                .position(|h| m.forms.iter().any(|f| contains_phrase(h, f)))
                .unwrap_or(usize::MAX);
            Some((depth, at, i))
        })
        .collect();
    found.sort_unstable();
    found.into_iter().map(|(_, _, i)| matchers[i].id.to_string()).collect()
}

fn tiered(matchers: &[Matcher<'_>], block: &ContentBlock, page: &PageSnapshot) -> Option<(Vec<String>, AssociationSource)> {
    let verbatim = mentioned_in_block(matchers, block);
    if !verbatim.is_empty() {
        return Some((verbatim, AssociationSource::Verbatim));
    }
    for header in block.section_path.iter().rev() {
        let found = mentioned(matchers, &normalize_name(header));
        if !found.is_empty() {
            return Some((found, AssociationSource::SectionHeader));
        }
    }
    let from_title = mentioned(matchers, &normalize_name(&page.title));
    if !from_title.is_empty() {
        return Some((from_title, AssociationSource::PageTitle));
    }
    None
}

/// The placeholder option standing in for `page`.
pub fn placeholder_option(page: &PageSnapshot) -> OptionCandidate {
    let mut candidate = Candidate::new(
        page.display_title(),
        OptionSource::Placeholder,
        Provenance::page(&page.page_id),
        page.captured_at,
    );
    candidate.id = placeholder_option_id(page);
    candidate
}

pub fn placeholder_option_id(page: &PageSnapshot) -> String {
    candidate_id(CandidateKind::Option, &dedup_key(page.display_title()))
}

pub fn associate_block<O: SourceTag, C: SourceTag>(
    block: &ContentBlock,
    page: &PageSnapshot,
    options: &[Candidate<O>],
    criteria: &[Candidate<C>],
) -> BlockAssociation {
    associate_with(block, page, &matchers(options), &matchers(criteria))
}

fn associate_with(
    block: &ContentBlock,
    page: &PageSnapshot,
    option_matchers: &[Matcher<'_>],
    criterion_matchers: &[Matcher<'_>],
) -> BlockAssociation {
    let (option_ids, option_source) = tiered(option_matchers, block, page)
        .unwrap_or_else(|| (vec![placeholder_option_id(page)], AssociationSource::PlaceholderOption));
    let (criterion_ids, criterion_source) = match tiered(criterion_matchers, block, page) {
        Some((ids, source)) => (ids, Some(source)),
        None => (Vec::new(), None),
    };
    BlockAssociation {
        page_id: page.page_id.clone(),
        block_id: block.block_id.clone(),
        option_ids,
        criterion_ids,
        option_source,
        criterion_source,
    }
}

/// Associations for every block of every page, keyed by block.
pub fn associate_pages<'p, O: SourceTag, C: SourceTag>(
    pages: impl IntoIterator<Item = &'p PageSnapshot>,
    options: &[Candidate<O>],
    criteria: &[Candidate<C>],
) -> std::collections::BTreeMap<BlockKey, BlockAssociation> {
    let option_matchers = matchers(options);
    let criterion_matchers = matchers(criteria);
    let mut out = std::collections::BTreeMap::new();
    for page in pages {
        for block in &page.blocks {
            let association = associate_with(block, page, &option_matchers, &criterion_matchers);
            out.insert(association.key(), association);
        }
    }
    out
}
