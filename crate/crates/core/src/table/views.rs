//! View models for the sidebar's list, detail and table views.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DecisionSpace, TableError};
use crate::attention::{BlockKey, EvidenceSnippet, Rating};
use crate::extraction::OptionSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportTarget {
    pub url: String,
    pub scroll_offset: i64,
    /// True when the offset was estimated from block order rather than
    /// measured by the client.
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnippetView {
    pub snippet_id: String,
    pub page_id: String,
    pub block_id: String,
    /// Zoom payload.
    pub html: String,
    pub text: String,
    pub rating: Rating,
    pub captured_at: i64,
    pub teleport: TeleportTarget,
}

impl From<&EvidenceSnippet> for SnippetView {
    fn from(s: &EvidenceSnippet) -> Self {
        Self {
            snippet_id: s.snippet_id.clone(),
            page_id: s.page_id.clone(),
            block_id: s.block_id.clone(),
            html: s.html.clone(),
            text: s.text.clone(),
            rating: s.rating,
            captured_at: s.captured_at,
            teleport: TeleportTarget {
                url: s.url.clone(),
                scroll_offset: s.scroll_offset,
                estimated: s.scroll_offset_estimated,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionEntry {
    pub option_id: String,
    pub name: String,
    pub placeholder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionEntry {
    pub group_id: String,
    pub label: String,
    pub score: f64,
    pub pinned: bool,
    /// Notification dot: the group has overlooked evidence.
    pub overlooked: bool,
    /// Group icon: more than one criterion was merged here.
    pub multi_member: bool,
    pub member_criterion_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ListViewModel {
    pub options: Vec<OptionEntry>,
    pub criteria: Vec<CriterionEntry>,
    pub visible_count: usize,
    pub total_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum DetailTarget {
    Group(String),
    Option(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailSection {
    /// Option id for a group detail, group id for an option detail.
    pub id: String,
    pub title: String,
    pub snippets: Vec<SnippetView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailViewModel {
    pub target: DetailTarget,
    pub title: String,
    pub sections: Vec<DetailSection>,
    /// Unattended blocks for a group detail (the banner).
    pub overlooked: Vec<BlockKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnView {
    pub group_id: String,
    pub label: String,
    pub score: f64,
    pub pinned: bool,
    pub overlooked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellView {
    pub group_id: String,
    pub snippets: Vec<SnippetView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowView {
    pub option_id: String,
    pub name: String,
    pub cells: Vec<CellView>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableViewModel {
    pub columns: Vec<ColumnView>,
    pub rows: Vec<RowView>,
}

fn is_placeholder(sources: &std::collections::BTreeSet<OptionSource>) -> bool {
    sources.iter().all(|s| *s == OptionSource::Placeholder)
}

fn snippet_views(space: &DecisionSpace, option_id: &str, group_id: &str) -> Vec<SnippetView> {
    space
        .cell(option_id, group_id)
        .map(|c| c.snippet_ids.iter().filter_map(|id| space.snippets.get(id)).map(SnippetView::from).collect())
        .unwrap_or_default()
}

pub fn render_list(space: &DecisionSpace) -> ListViewModel {
    let options = space
        .options
        .iter()
        .map(|o| OptionEntry { option_id: o.id.clone(), name: o.name.clone(), placeholder: is_placeholder(&o.sources) })
        .collect();
    let criteria = space
        .visible_groups()
        .iter()
        .filter_map(|gid| space.group(gid))
        .map(|g| CriterionEntry {
            group_id: g.group_id.clone(),
            label: g.label.clone(),
            score: space.ranking.score(&g.group_id),
            pinned: space.ranking.is_pinned(&g.group_id),
            overlooked: space.is_overlooked(&g.group_id),
            multi_member: g.member_criterion_ids.len() > 1,
            member_criterion_ids: g.member_criterion_ids.clone(),
        })
        .collect();
    ListViewModel { options, criteria, visible_count: space.ranking.visible_count, total_groups: space.groups.len() }
}

/// Snippets for a group organized by option, or for an option organized by
/// ranked group. Empty sections are omitted.
pub fn render_detail(space: &DecisionSpace, target: &DetailTarget) -> Result<DetailViewModel, TableError> {
    match target {
        DetailTarget::Group(gid) => {
            let group = space.group(gid).ok_or_else(|| TableError::UnknownGroup(gid.clone()))?;
            let sections = space
                .options
                .iter()
                .map(|o| DetailSection { id: o.id.clone(), title: o.name.clone(), snippets: snippet_views(space, &o.id, gid) })
                .filter(|s| !s.snippets.is_empty())
                .collect();
            Ok(DetailViewModel {
                target: target.clone(),
                title: group.label.clone(),
                sections,
                overlooked: space.overlooked.get(gid).cloned().unwrap_or_default(),
            })
        }
        DetailTarget::Option(oid) => {
            let option = space.option(oid).ok_or_else(|| TableError::UnknownTarget(oid.clone()))?;
            let labels: BTreeMap<&str, &str> =
                space.groups.iter().map(|g| (g.group_id.as_str(), g.label.as_str())).collect();
            let sections = space
                .ranked_groups()
                .iter()
                .map(|gid| DetailSection {
                    id: gid.clone(),
                    title: labels.get(gid.as_str()).copied().unwrap_or_default().to_string(),
                    snippets: snippet_views(space, oid, gid),
                })
                .filter(|s| !s.snippets.is_empty())
                .collect();
            Ok(DetailViewModel { target: target.clone(), title: option.name.clone(), sections, overlooked: Vec::new() })
        }
    }
}

/// Visible ranked groups as columns, options as rows.
pub fn render_table(space: &DecisionSpace) -> TableViewModel {
    let visible = space.visible_groups();
    let columns = visible
        .iter()
        .filter_map(|gid| space.group(gid))
        .map(|g| ColumnView {
            group_id: g.group_id.clone(),
            label: g.label.clone(),
            score: space.ranking.score(&g.group_id),
            pinned: space.ranking.is_pinned(&g.group_id),
            overlooked: space.is_overlooked(&g.group_id),
        })
        .collect();
    let rows = space
        .options
        .iter()
        .map(|o| RowView {
            option_id: o.id.clone(),
            name: o.name.clone(),
            cells: visible
                .iter()
                .map(|gid| CellView { group_id: gid.clone(), snippets: snippet_views(space, &o.id, gid) })
                .collect(),
        })
        .collect();
    TableViewModel { columns, rows }
}

pub fn teleport_target(space: &DecisionSpace, snippet_id: &str) -> Result<TeleportTarget, TableError> {
    space
        .snippets
        .get(snippet_id)
        .map(|s| SnippetView::from(s).teleport)
        .ok_or_else(|| TableError::UnknownSnippet(snippet_id.to_string()))
}
