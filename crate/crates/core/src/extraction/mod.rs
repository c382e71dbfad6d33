//! Option and criterion extraction.
//!
//! Options come from "A vs B" titles and opening paragraphs, and from
//! entities found in titles and headers that are corroborated by other
//! visited pages, by alternatives suggestions, or by repeated mentions.
//! Criteria come from section and table headers. Every candidate is keyed by
//! its dedup key so the same name found twice collapses into one entry.

mod entities;
mod pipeline;
mod suggest;
mod title;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::page_model::Timestamp;
use crate::text::{dedup_key, normalize_name, short_hash};

pub use entities::{
    extract_entities, extract_entities_with, EntityExtractor, HeuristicEntityExtractor,
    MAX_ENTITY_TOKENS,
};
pub use pipeline::{
    corroborate_option, extract_criteria, extract_options, extract_session, Corroboration,
    ExtractedCandidates, ExtractionConfig, Extractors, DEFAULT_REPEATED_MENTION_THRESHOLD,
};
pub use suggest::{AlternativesSuggester, FixtureSuggester, NoSuggestions};
pub use title::{extract_options_from_prose, extract_options_from_title};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractionError {
    #[error("selection is empty")]
    EmptySelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    Option,
    Criterion,
}

impl CandidateKind {
    fn id_prefix(self) -> &'static str {
        match self {
            CandidateKind::Option => "opt",
            CandidateKind::Criterion => "crit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionSource {
    TitleVs,
    EntityTitleCorroboration,
    AutocompleteVs,
    RepeatedMention,
    Manual,
    /// Page title standing in for an option on blocks that mention none.
    Placeholder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionSource {
    SectionHeader,
    TableHeader,
    Entity,
    Manual,
}

pub trait SourceTag: Copy + Ord {
    const MANUAL: Self;
    const KIND: CandidateKind;
}

impl SourceTag for OptionSource {
    const MANUAL: Self = OptionSource::Manual;
    const KIND: CandidateKind = CandidateKind::Option;
}

impl SourceTag for CriterionSource {
    const MANUAL: Self = CriterionSource::Manual;
    const KIND: CandidateKind = CandidateKind::Criterion;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub page_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_id: Option<String>,
}

impl Provenance {
    pub fn page(page_id: &str) -> Self {
        Self { page_id: page_id.to_string(), block_id: None }
    }

    pub fn block(page_id: &str, block_id: &str) -> Self {
        Self { page_id: page_id.to_string(), block_id: Some(block_id.to_string()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate<S: Ord> {
    pub id: String,
    pub name: String,
    pub normalized_name: String,
    pub sources: BTreeSet<S>,
    pub provenance: BTreeSet<Provenance>,
    pub first_seen_at: Timestamp,
}

pub type OptionCandidate = Candidate<OptionSource>;
pub type CriterionCandidate = Candidate<CriterionSource>;

/// Stable id for a candidate first seen under `key`.
pub fn candidate_id(kind: CandidateKind, key: &str) -> String {
    format!("{}-{}", kind.id_prefix(), short_hash(&[key], 10))
}

impl<S: SourceTag> Candidate<S> {
    pub fn new(name: &str, source: S, provenance: Provenance, first_seen_at: Timestamp) -> Self {
        let name = name.trim().to_string();
        let key = dedup_key(&name);
        Self {
            id: candidate_id(S::KIND, &key),
            normalized_name: normalize_name(&name),
            name,
            sources: BTreeSet::from([source]),
            provenance: BTreeSet::from([provenance]),
            first_seen_at,
        }
    }

    /// Dedup key: normalized name with a naive plural strip.
    pub fn key(&self) -> String {
        dedup_key(&self.name)
    }

    pub fn is_manual(&self) -> bool {
        self.sources.contains(&S::MANUAL)
    }

    pub fn rename(&mut self, name: &str) {
        self.name = name.trim().to_string();
        self.normalized_name = normalize_name(&self.name);
    }

    /// Folds `other` into `self`: earliest first-seen wins the display name
    /// and id, sources and provenance are unioned.
    fn absorb(&mut self, other: Candidate<S>) {
        if other.first_seen_at < self.first_seen_at {
            self.first_seen_at = other.first_seen_at;
            self.name = other.name;
            self.normalized_name = other.normalized_name;
            self.id = other.id;
        }
        self.sources.extend(other.sources);
        self.provenance.extend(other.provenance);
    }
}

/// Merges candidates whose dedup keys collide. Output keeps the order in
/// which each key first appears in the input.
pub fn dedupe_candidates<S: SourceTag>(candidates: Vec<Candidate<S>>) -> Vec<Candidate<S>> {
    let mut out: Vec<Candidate<S>> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for candidate in candidates {
        if candidate.normalized_name.is_empty() {
            continue;
        }
        let key = candidate.key();
        match index.get(&key) {
            Some(&i) => out[i].absorb(candidate),
            None => {
                index.insert(key, out.len());
                out.push(candidate);
            }
        }
    }
    out
}

/// Adds a manually selected text as a candidate, merging into an existing
/// candidate with the same dedup key. Returns the resulting candidate.
pub fn manual_capture<S: SourceTag>(
    candidates: &mut Vec<Candidate<S>>,
    text: &str,
    provenance: Provenance,
    captured_at: Timestamp,
) -> Result<Candidate<S>, ExtractionError> {
    let trimmed = text.trim();
    if trimmed.is_empty() || normalize_name(trimmed).is_empty() {
        return Err(ExtractionError::EmptySelection);
    }
    let candidate = Candidate::new(trimmed, S::MANUAL, provenance, captured_at);
    let key = candidate.key();
    candidates.push(candidate);
    *candidates = dedupe_candidates(std::mem::take(candidates));
    Ok(candidates
        .iter()
        .find(|c| c.key() == key)
        .cloned()
        .expect("captured candidate survives dedup"))
}
