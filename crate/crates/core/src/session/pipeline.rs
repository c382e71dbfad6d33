//! The full recompute: segment → extract → qualify/score → associate →
//! accumulate → group → rank.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Providers, SessionCore};
use crate::attention::{
    accumulate, associate_pages, collect_evidence, placeholder_option, placeholder_option_id, AssociationSource,
    BlockAssociation, BlockKey, EvidenceSnippet,
};
use crate::extraction::{
    dedupe_candidates, extract_session, ExtractedCandidates, ExtractionConfig, Extractors, OptionCandidate,
    OptionSource,
};
use crate::grouping::{
    detect_overlooked, embed_criterion, evidence_by_criterion, pair, propose_groups, EmbeddingVector,
    GroupingOverrides, ManualLabels, OverlookContext,
};
use crate::table::{
    apply_candidate_edits, render_list, render_table, DecisionSpace, ListViewModel, Redirects, RankingState,
    SpaceInputs, TableViewModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedVector {
    /// Criterion name the vector was computed for.
    pub name: String,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankingView {
    pub order: Vec<String>,
    pub pinned: Vec<String>,
    pub visible_count: usize,
}

/// Everything derived from a [`SessionCore`] at one revision.
#[derive(Debug, Clone, Default)]
pub struct Derived {
    pub space: DecisionSpace,
    pub associations: BTreeMap<BlockKey, BlockAssociation>,
    pub redirects: Redirects,
    pub list: ListViewModel,
    pub table: TableViewModel,
    pub ranking: RankingView,
}

/// Work reused across recomputes. Extraction depends only on the pages and
/// manual options; block associations also on the live candidates.
#[derive(Debug, Clone, Default)]
pub(crate) struct Memo {
    raw: Option<ExtractedCandidates>,
    associations: Option<(Vec<(String, String)>, BTreeMap<BlockKey, BlockAssociation>)>,
}

impl Memo {
    /// Call whenever pages or manual options change.
    pub(crate) fn invalidate(&mut self) {
        *self = Self::default();
    }
}

pub(crate) fn extract(core: &SessionCore, providers: &Providers) -> ExtractedCandidates {
    let pages: Vec<_> = core.pages.iter().collect();
    let extractors = Extractors { entities: providers.entities.as_ref(), suggester: providers.suggester.as_ref() };
    let config = ExtractionConfig { repeated_mention_threshold: core.config.repeated_mention_threshold };
    let manual_names: Vec<String> = core.manual_options.iter().map(|o| o.name.clone()).collect();
    extract_session(&pages, extractors, config, &manual_names)
}

fn follow(redirects: &Redirects, id: &str) -> String {
    let mut current = id;
    // renames can chain; bound the walk in case of a cycle
    for _ in 0..redirects.len() {
        match redirects.get(current) {
            Some(next) if next != current => current = next,
            _ => break,
        }
    }
    current.to_string()
}

fn effective_overrides(overrides: &GroupingOverrides, redirects: &Redirects) -> GroupingOverrides {
    let remap = |pairs: &BTreeSet<(String, String)>| -> BTreeSet<(String, String)> {
        pairs
            .iter()
            .map(|(a, b)| (follow(redirects, a), follow(redirects, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| pair(&a, &b))
            .collect()
    };
    let forbidden = remap(&overrides.forbidden_merges);
    let forced = remap(&overrides.forced_merges).difference(&forbidden).cloned().collect();
    GroupingOverrides { forced_merges: forced, forbidden_merges: forbidden }
}

fn effective_labels(labels: &ManualLabels, redirects: &Redirects) -> ManualLabels {
    let mut out = ManualLabels::new();
    // direct keys first so a surviving candidate's own label wins
    for (k, v) in labels {
        if !redirects.contains_key(k) {
            out.insert(k.clone(), v.clone());
        }
    }
    for (k, v) in labels {
        if redirects.contains_key(k) {
            out.entry(follow(redirects, k)).or_insert_with(|| v.clone());
        }
    }
    out
}

fn is_placeholder(o: &OptionCandidate) -> bool {
    o.sources.iter().all(|s| *s == OptionSource::Placeholder)
}

pub(crate) fn recompute(core: &mut SessionCore, providers: &Providers, memo: &mut Memo) -> Derived {
    let raw = memo.raw.get_or_insert_with(|| extract(core, providers));
    let mut options = raw.options.clone();
    options.extend(core.manual_options.iter().cloned());
    options.extend(core.pages.iter().map(placeholder_option));
    let mut criteria = raw.criteria.clone();
    criteria.extend(core.manual_criteria.iter().cloned());
    let (mut options, criteria, redirects) =
        apply_candidate_edits(dedupe_candidates(options), dedupe_candidates(criteria), &core.edits);
    options.sort_by_key(|o| o.first_seen_at);

    let matchable: Vec<OptionCandidate> = options.iter().filter(|o| !is_placeholder(o)).cloned().collect();
    let fingerprint: Vec<(String, String)> = matchable
        .iter()
        .map(|o| (o.id.clone(), o.name.clone()))
        .chain(std::iter::once((String::new(), String::new())))
        .chain(criteria.iter().map(|c| (c.id.clone(), c.name.clone())))
        .collect();
    let mut associations = match &memo.associations {
        Some((key, cached)) if *key == fingerprint => cached.clone(),
        _ => {
            let fresh = associate_pages(core.pages.iter(), &matchable, &criteria);
            memo.associations = Some((fingerprint, fresh.clone()));
            fresh
        }
    };
    for page in &core.pages {
        let fallback = follow(&redirects, &placeholder_option_id(page));
        for block in &page.blocks {
            if let Some(a) = associations.get_mut(&BlockKey::new(&page.page_id, &block.block_id)) {
                if a.option_source == AssociationSource::PlaceholderOption {
                    a.option_ids = vec![fallback.clone()];
                }
            }
        }
    }
    for m in core.edits.moves.values() {
        if let Some(a) = associations.get_mut(&BlockKey::new(&m.page_id, &m.block_id)) {
            a.option_ids = vec![follow(&redirects, &m.option_id)];
            a.criterion_ids = vec![follow(&redirects, &m.criterion_id)];
        }
    }

    let criterion_ids: Vec<String> = criteria.iter().map(|c| c.id.clone()).collect();
    let attention: BTreeMap<String, f64> = accumulate(&core.ledger, &associations, &criterion_ids)
        .into_iter()
        .map(|a| (a.criterion_id, a.score))
        .collect();

    let pages: BTreeMap<&str, _> = core.pages.iter().map(|p| (p.page_id.as_str(), p)).collect();
    let mut snippets: BTreeMap<BlockKey, EvidenceSnippet> = collect_evidence(&core.ledger, |id| pages.get(id).copied());
    for s in snippets.values_mut() {
        if let Some(r) = core.edits.ratings.get(&s.snippet_id) {
            s.rating = *r;
        }
    }

    refresh_vectors(core, providers, &criteria, &associations, &snippets);
    let vectors: BTreeMap<String, EmbeddingVector> =
        core.vectors.iter().map(|(id, c)| (id.clone(), c.vector.clone())).collect();
    let overrides = effective_overrides(&core.overrides, &redirects);
    let labels = effective_labels(&core.edits.group_labels, &redirects);
    let groups = propose_groups(&criteria, &vectors, &overrides, core.config.similarity_threshold, &attention, &labels);

    // pins follow their anchor criterion through merges, splits and renames
    let mut pinned: Vec<String> = Vec::new();
    for gid in &core.pinned {
        let anchor = follow(&redirects, gid.strip_prefix("grp-").unwrap_or(gid));
        if let Some(g) = groups.iter().find(|g| g.contains(&anchor)) {
            if !pinned.contains(&g.group_id) {
                pinned.push(g.group_id.clone());
            }
        }
    }
    core.pinned = pinned.clone();

    let attended: BTreeSet<BlockKey> =
        core.ledger.qualified().map(|e| BlockKey::new(&e.page_id, &e.block_id)).collect();
    let headings: BTreeSet<BlockKey> = core
        .pages
        .iter()
        .flat_map(|p| p.headings().map(move |b| BlockKey::new(&p.page_id, &b.block_id)))
        .collect();
    let overlooked = groups
        .iter()
        .map(|g| {
            let ctx = OverlookContext {
                associations: &associations,
                attended_blocks: &attended,
                excluded_blocks: &headings,
                vectors: &vectors,
                threshold: core.config.similarity_threshold,
                group_score: g.member_criterion_ids.iter().map(|m| attention.get(m).copied().unwrap_or(0.0)).sum(),
            };
            (g.group_id.clone(), detect_overlooked(g, &ctx))
        })
        .collect();

    let space = DecisionSpace::assemble(SpaceInputs {
        options: &options,
        criteria: &criteria,
        groups: &groups,
        associations: &associations,
        snippets: &snippets,
        attention: &attention,
        overlooked,
        ranking: RankingState { pinned, visible_count: core.visible_count, scores: BTreeMap::new() },
        deleted: core.edits.deleted.clone(),
    });
    let ranking = RankingView {
        order: space.ranked_groups(),
        pinned: space.ranking.pinned.clone(),
        visible_count: space.ranking.visible_count,
    };
    Derived { list: render_list(&space), table: render_table(&space), ranking, space, associations, redirects }
}

/// Criterion vectors are refreshed from their evidence at most once per
/// debounce window. New or renamed criteria are embedded immediately so the
/// grouping always covers every live criterion.
fn refresh_vectors(
    core: &mut SessionCore,
    providers: &Providers,
    criteria: &[crate::extraction::CriterionCandidate],
    associations: &BTreeMap<BlockKey, BlockAssociation>,
    snippets: &BTreeMap<BlockKey, EvidenceSnippet>,
) {
    let due = core.vectors_refreshed_at.map_or(true, |t| core.clock - t >= core.config.grouping_debounce_ms);
    let evidence = evidence_by_criterion(associations, snippets);
    let mut next = BTreeMap::new();
    for c in criteria {
        let cached = core.vectors.get(&c.id).filter(|v| v.name == c.name);
        if let (Some(cached), false) = (cached, due) {
            next.insert(c.id.clone(), cached.clone());
            continue;
        }
        let attached = evidence.get(&c.id).map(Vec::as_slice).unwrap_or_default();
        match embed_criterion(c, attached, providers.embedder.as_ref()) {
            Ok(vector) => {
                next.insert(c.id.clone(), CachedVector { name: c.name.clone(), vector });
            }
            Err(e) => {
                tracing::warn!(criterion = %c.id, error = %e, "embedding unavailable, keeping previous vector");
                if let Some(previous) = core.vectors.get(&c.id) {
                    next.insert(c.id.clone(), previous.clone());
                }
            }
        }
    }
    if due {
        core.vectors_refreshed_at = Some(core.clock);
    }
    core.vectors = next;
}
