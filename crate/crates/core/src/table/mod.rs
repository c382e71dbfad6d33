//! Options × criterion-groups grid, attention ranking and user edits.

mod edits;
mod export;
mod views;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{BlockAssociation, BlockKey, EvidenceSnippet};
use crate::extraction::{CriterionCandidate, OptionCandidate, OptionSource};
use crate::grouping::CriterionGroup;
use crate::page_model::Timestamp;
use crate::text::normalize_name;

pub use edits::{apply_candidate_edits, EditTarget, Edits, Redirects, SnippetMove, Tombstones};
pub use export::{export_csv, export_json, export_json_value, export_markdown, ExportFormat, SCHEMA_VERSION};
pub use views::{
    render_detail, render_list, render_table, teleport_target, CellView, ColumnView, CriterionEntry,
    DetailSection, DetailTarget, DetailViewModel, ListViewModel, OptionEntry, RowView, SnippetView,
    TableViewModel, TeleportTarget,
};

pub const DEFAULT_VISIBLE_COUNT: usize = 15;

/// Relative tolerance under which two group scores count as tied.
pub const SCORE_TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("unknown group {0}")]
    UnknownGroup(String),
    #[error("visible count must be at least 1")]
    InvalidCount,
    #[error("unknown target {0}")]
    UnknownTarget(String),
    #[error("unknown snippet {0}")]
    UnknownSnippet(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingState {
    pub pinned: Vec<String>,
    pub visible_count: usize,
    /// Group score: sum of member attention.
    pub scores: BTreeMap<String, f64>,
}

impl Default for RankingState {
    fn default() -> Self {
        Self { pinned: Vec::new(), visible_count: DEFAULT_VISIBLE_COUNT, scores: BTreeMap::new() }
    }
}

impl RankingState {
    pub fn is_pinned(&self, group_id: &str) -> bool {
        self.pinned.iter().any(|g| g == group_id)
    }

    pub fn score(&self, group_id: &str) -> f64 {
        self.scores.get(group_id).copied().unwrap_or(0.0)
    }

    /// Appends `group_id` to the pinned list. Pinning twice is a no-op.
    pub fn pin(&mut self, group_id: &str, live: &BTreeSet<String>) -> Result<(), TableError> {
        require_live(group_id, live)?;
        if !self.is_pinned(group_id) {
            self.pinned.push(group_id.to_string());
        }
        Ok(())
    }

    pub fn unpin(&mut self, group_id: &str, live: &BTreeSet<String>) -> Result<(), TableError> {
        require_live(group_id, live)?;
        self.pinned.retain(|g| g != group_id);
        Ok(())
    }

    /// Moves `group_id` to `new_index` among the pinned groups, pinning it
    /// first if needed. Indexes past the end place it last.
    pub fn reorder(&mut self, group_id: &str, new_index: usize, live: &BTreeSet<String>) -> Result<(), TableError> {
        require_live(group_id, live)?;
        self.pinned.retain(|g| g != group_id);
        let at = new_index.min(self.pinned.len());
        self.pinned.insert(at, group_id.to_string());
        Ok(())
    }

    pub fn set_visible_count(&mut self, n: usize) -> Result<(), TableError> {
        if n == 0 {
            return Err(TableError::InvalidCount);
        }
        self.visible_count = n;
        Ok(())
    }

    /// Visible entries given the current number of live groups.
    pub fn shown(&self, live_count: usize) -> usize {
        self.visible_count.min(live_count)
    }
}

fn require_live(group_id: &str, live: &BTreeSet<String>) -> Result<(), TableError> {
    if live.contains(group_id) {
        Ok(())
    } else {
        Err(TableError::UnknownGroup(group_id.to_string()))
    }
}

/// What ranking needs to know about a group besides its score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankEntry {
    pub group_id: String,
    /// Earliest first-seen time among members.
    pub first_seen_at: Timestamp,
    pub label: String,
}

fn scores_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= SCORE_TIE_EPSILON * a.abs().max(b.abs())
}

/// Pinned groups in pin order, then the rest by score descending. Scores
/// within a relative [`SCORE_TIE_EPSILON`] form a tie run ordered by earliest
/// first-seen member, then normalized label, then id.
pub fn rank_criteria(state: &RankingState, entries: &[RankEntry]) -> Vec<String> {
    let live: BTreeSet<&str> = entries.iter().map(|e| e.group_id.as_str()).collect();
    let mut out: Vec<String> = Vec::with_capacity(entries.len());
    for g in &state.pinned {
        if live.contains(g.as_str()) && !out.contains(g) {
            out.push(g.clone());
        }
    }
    let mut rest: Vec<(&RankEntry, f64, String)> = entries
        .iter()
        .filter(|e| !state.is_pinned(&e.group_id))
        .map(|e| (e, state.score(&e.group_id), normalize_name(&e.label)))
        .collect();
    rest.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    let tie_break = |a: &(&RankEntry, f64, String), b: &(&RankEntry, f64, String)| {
        a.0.first_seen_at
            .cmp(&b.0.first_seen_at)
            .then_with(|| a.2.cmp(&b.2))
            .then_with(|| a.0.group_id.cmp(&b.0.group_id))
    };
    let mut start = 0;
    while start < rest.len() {
        let head = rest[start].1;
        let mut end = start + 1;
        while end < rest.len() && scores_tie(head, rest[end].1) {
            end += 1;
        }
        rest[start..end].sort_by(tie_break);
        start = end;
    }
    out.extend(rest.into_iter().map(|(e, _, _)| e.group_id.clone()));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub option_id: String,
    pub group_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub option_id: String,
    pub group_id: String,
    pub snippet_ids: Vec<String>,
}

/// Fully derived grid for one revision.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpace {
    /// Live options in first-seen order. Placeholders appear only when they
    /// hold evidence.
    pub options: Vec<OptionCandidate>,
    pub criteria: Vec<CriterionCandidate>,
    pub groups: Vec<CriterionGroup>,
    pub cells: Vec<Cell>,
    pub snippets: BTreeMap<String, EvidenceSnippet>,
    /// Criterion attention A_c.
    pub attention: BTreeMap<String, f64>,
    /// Unattended blocks per group; a non-empty list raises the dot.
    pub overlooked: BTreeMap<String, Vec<BlockKey>>,
    pub ranking: RankingState,
    pub deleted: Tombstones,
}

/// Inputs to [`DecisionSpace::assemble`].
pub struct SpaceInputs<'a> {
    pub options: &'a [OptionCandidate],
    pub criteria: &'a [CriterionCandidate],
    pub groups: &'a [CriterionGroup],
    pub associations: &'a BTreeMap<BlockKey, BlockAssociation>,
    pub snippets: &'a BTreeMap<BlockKey, EvidenceSnippet>,
    pub attention: &'a BTreeMap<String, f64>,
    pub overlooked: BTreeMap<String, Vec<BlockKey>>,
    pub ranking: RankingState,
    pub deleted: Tombstones,
}

impl DecisionSpace {
    /// Places each snippet in exactly one cell: the first live option and the
    /// group of the first live criterion of its block association, which
    /// lists the most specific match first. Snippets without a live option
    /// or criterion are left out of the grid.
    pub fn assemble(inputs: SpaceInputs<'_>) -> Self {
        let live_options: BTreeSet<&str> = inputs.options.iter().map(|o| o.id.as_str()).collect();
        let mut group_of: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, g) in inputs.groups.iter().enumerate() {
            for m in &g.member_criterion_ids {
                group_of.insert(m.as_str(), i);
            }
        }

        let mut cells: BTreeMap<CellKey, Vec<&EvidenceSnippet>> = BTreeMap::new();
        let mut placed: BTreeMap<String, EvidenceSnippet> = BTreeMap::new();
        for (key, snippet) in inputs.snippets {
            let Some(association) = inputs.associations.get(key) else { continue };
            let option = association.option_ids.iter().find(|o| live_options.contains(o.as_str()));
            let group = association.criterion_ids.iter().find_map(|c| group_of.get(c.as_str()));
            let (Some(option_id), Some(&gi)) = (option, group) else { continue };
            let cell = CellKey { option_id: option_id.clone(), group_id: inputs.groups[gi].group_id.clone() };
            cells.entry(cell).or_default().push(snippet);
            placed.insert(snippet.snippet_id.clone(), snippet.clone());
        }

        let used_options: BTreeSet<&str> = cells.keys().map(|k| k.option_id.as_str()).collect();
        let options = inputs
            .options
            .iter()
            .filter(|o| !o.sources.iter().all(|s| *s == OptionSource::Placeholder) || used_options.contains(o.id.as_str()))
            .cloned()
            .collect();

        let cells = cells
            .into_iter()
            .map(|(k, mut snippets)| {
                snippets.sort_by(|a, b| a.captured_at.cmp(&b.captured_at).then_with(|| a.snippet_id.cmp(&b.snippet_id)));
                Cell {
                    option_id: k.option_id,
                    group_id: k.group_id,
                    snippet_ids: snippets.iter().map(|s| s.snippet_id.clone()).collect(),
                }
            })
            .collect();

        let mut ranking = inputs.ranking;
        ranking.scores = inputs
            .groups
            .iter()
            .map(|g| {
                let total = g.member_criterion_ids.iter().map(|m| inputs.attention.get(m).copied().unwrap_or(0.0)).sum();
                (g.group_id.clone(), total)
            })
            .collect();
        let live = inputs.groups.iter().map(|g| g.group_id.as_str()).collect::<BTreeSet<_>>();
        ranking.pinned.retain(|g| live.contains(g.as_str()));

        Self {
            options,
            criteria: inputs.criteria.to_vec(),
            groups: inputs.groups.to_vec(),
            cells,
            snippets: placed,
            attention: inputs.attention.clone(),
            overlooked: inputs.overlooked,
            ranking,
            deleted: inputs.deleted,
        }
    }

    pub fn live_group_ids(&self) -> BTreeSet<String> {
        self.groups.iter().map(|g| g.group_id.clone()).collect()
    }

    pub fn group(&self, group_id: &str) -> Option<&CriterionGroup> {
        self.groups.iter().find(|g| g.group_id == group_id)
    }

    pub fn option(&self, option_id: &str) -> Option<&OptionCandidate> {
        self.options.iter().find(|o| o.id == option_id)
    }

    pub fn rank_entries(&self) -> Vec<RankEntry> {
        let first_seen: BTreeMap<&str, Timestamp> =
            self.criteria.iter().map(|c| (c.id.as_str(), c.first_seen_at)).collect();
        self.groups
            .iter()
            .map(|g| RankEntry {
                group_id: g.group_id.clone(),
                first_seen_at: g
                    .member_criterion_ids
                    .iter()
                    .filter_map(|m| first_seen.get(m.as_str()).copied())
                    .min()
                    .unwrap_or_default(),
                label: g.label.clone(),
            })
            .collect()
    }

    /// Every live group, ranked.
    pub fn ranked_groups(&self) -> Vec<String> {
        rank_criteria(&self.ranking, &self.rank_entries())
    }

    /// The ranked groups the list and table views show.
    pub fn visible_groups(&self) -> Vec<String> {
        let mut ranked = self.ranked_groups();
        ranked.truncate(self.ranking.shown(ranked.len()));
        ranked
    }

    pub fn cell(&self, option_id: &str, group_id: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.option_id == option_id && c.group_id == group_id)
    }

    pub fn is_overlooked(&self, group_id: &str) -> bool {
        self.overlooked.get(group_id).is_some_and(|v| !v.is_empty())
    }
}
