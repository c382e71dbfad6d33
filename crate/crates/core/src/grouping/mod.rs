//! Criteria grouping.
//!
//! Each criterion is embedded as the mean of its own name and the texts of
//! the evidence attached to it. Criteria whose cosine similarity reaches the
//! threshold are linked, forced pairs are always linked, tombstoned pairs
//! never are, and connected components become groups (single link).

mod embedding;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{BlockAssociation, BlockKey, EvidenceSnippet};
use crate::error::ProviderError;
use crate::extraction::CriterionCandidate;
use crate::text::normalize_name;

pub use embedding::{
    EmbeddingProvider, EmbeddingVector, FixtureEmbedder, TrigramEmbedder, DEFAULT_EMBEDDING_DIMENSION,
};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.80;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupingError {
    #[error("partition must cover the group's members exactly, in at least two non-empty parts")]
    InvalidPartition,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionGroup {
    pub group_id: String,
    pub member_criterion_ids: Vec<String>,
    pub label: String,
    pub pinned_label_manual: bool,
}

impl CriterionGroup {
    pub fn contains(&self, criterion_id: &str) -> bool {
        self.member_criterion_ids.iter().any(|m| m == criterion_id)
    }

    /// Id of the member the group is named after (`grp-<anchor>`).
    pub fn anchor(&self) -> &str {
        self.group_id.strip_prefix("grp-").unwrap_or(&self.group_id)
    }
}

pub fn group_id_for_anchor(anchor_criterion_id: &str) -> String {
    format!("grp-{anchor_criterion_id}")
}

/// Unordered criterion pair stored with the smaller id first.
pub type CriterionPair = (String, String);

pub fn pair(a: &str, b: &str) -> CriterionPair {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Sticky manual grouping decisions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingOverrides {
    pub forced_merges: BTreeSet<CriterionPair>,
    pub forbidden_merges: BTreeSet<CriterionPair>,
}

impl GroupingOverrides {
    pub fn force(&mut self, a: &str, b: &str) {
        let p = pair(a, b);
        self.forbidden_merges.remove(&p);
        self.forced_merges.insert(p);
    }

    pub fn forbid(&mut self, a: &str, b: &str) {
        let p = pair(a, b);
        self.forced_merges.remove(&p);
        self.forbidden_merges.insert(p);
    }

    pub fn is_forced(&self, a: &str, b: &str) -> bool {
        self.forced_merges.contains(&pair(a, b))
    }

    pub fn is_forbidden(&self, a: &str, b: &str) -> bool {
        self.forbidden_merges.contains(&pair(a, b))
    }
}

/// Mean of the criterion name's embedding and the embeddings of its
/// evidence texts, re-normalized.
pub fn embed_criterion(
    criterion: &CriterionCandidate,
    evidence: &[&EvidenceSnippet],
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingVector, ProviderError> {
    let mut texts = vec![criterion.name.clone()];
    texts.extend(evidence.iter().map(|s| s.text.clone()));
    let vectors = provider.embed_batch(&texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError::Malformed(format!(
            "expected {} vectors, got {}",
            texts.len(),
            vectors.len()
        )));
    }
    Ok(EmbeddingVector::mean(&vectors).expect("at least the name vector"))
}

/// Evidence attached to each criterion through block associations.
pub fn evidence_by_criterion<'a>(
    associations: &BTreeMap<BlockKey, BlockAssociation>,
    snippets: &'a BTreeMap<BlockKey, EvidenceSnippet>,
) -> BTreeMap<String, Vec<&'a EvidenceSnippet>> {
    let mut out: BTreeMap<String, Vec<&EvidenceSnippet>> = BTreeMap::new();
    for (key, snippet) in snippets {
        if let Some(association) = associations.get(key) {
            for c in &association.criterion_ids {
                out.entry(c.clone()).or_default().push(snippet);
            }
        }
    }
    out
}

struct DisjointSet {
    parent: Vec<usize>,
    /// Members per root; empty for non-roots.
    members: Vec<Vec<usize>>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), members: (0..n).map(|i| vec![i]).collect() }
    }

    fn members(&self, root: usize) -> &[usize] {
        &self.members[root]
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index becomes the root so results do not depend on call order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
            let moved = std::mem::take(&mut self.members[hi]);
            self.members[lo].extend(moved);
        }
    }
}

/// Labels chosen by the user, keyed by the group's anchor criterion id.
pub type ManualLabels = BTreeMap<String, String>;

/// Single-link clustering of criteria. Forced pairs are linked first; a
/// merge that would put a forbidden pair in one group is skipped.
///
/// Groups come out ordered by their anchor (earliest first-seen member, ties
/// by id). The label is the member with the highest attention, ties by
/// earliest first-seen, unless the user renamed the group.
pub fn propose_groups(
    criteria: &[CriterionCandidate],
    vectors: &BTreeMap<String, EmbeddingVector>,
    overrides: &GroupingOverrides,
    threshold: f64,
    attention: &BTreeMap<String, f64>,
    manual_labels: &ManualLabels,
) -> Vec<CriterionGroup> {
    let mut sorted: Vec<&CriterionCandidate> = criteria.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted.dedup_by(|a, b| a.id == b.id);

    // candidate edges: forced pairs first, then similar pairs by decreasing
    // similarity; ties by position so the outcome is order independent
    let mut edges: Vec<(bool, f64, usize, usize)> = Vec::new();
    for i in 0..sorted.len() {
        for j in (i + 1)..sorted.len() {
            let (a, b) = (&sorted[i].id, &sorted[j].id);
            if overrides.is_forbidden(a, b) {
                continue;
            }
            let similarity = match (vectors.get(a), vectors.get(b)) {
                (Some(va), Some(vb)) => va.cosine(vb),
                _ => f64::NEG_INFINITY,
            };
            let forced = overrides.is_forced(a, b);
            if forced || similarity >= threshold {
                edges.push((forced, similarity, i, j));
            }
        }
    }
    edges.sort_by(|x, y| {
        y.0.cmp(&x.0)
            .then_with(|| y.1.total_cmp(&x.1))
            .then_with(|| (x.2, x.3).cmp(&(y.2, y.3)))
    });

    let mut sets = DisjointSet::new(sorted.len());
    for (_, _, i, j) in edges {
        let (ri, rj) = (sets.find(i), sets.find(j));
        if ri == rj {
            continue;
        }
        // a split pair stays apart even when a third criterion bridges them
        let blocked = sets.members(ri).iter().any(|&x| {
            sets.members(rj).iter().any(|&y| overrides.is_forbidden(&sorted[x].id, &sorted[y].id))
        });
        if !blocked {
            sets.union(i, j);
        }
    }

    let mut components: BTreeMap<usize, Vec<&CriterionCandidate>> = BTreeMap::new();
    for i in 0..sorted.len() {
        let root = sets.find(i);
        components.entry(root).or_default().push(sorted[i]);
    }

    let mut groups: Vec<CriterionGroup> = components
        .into_values()
        .map(|mut members| {
            members.sort_by(|a, b| a.first_seen_at.cmp(&b.first_seen_at).then_with(|| a.id.cmp(&b.id)));
            build_group(&members, attention, manual_labels)
        })
        .collect();
    groups.sort_by(|a, b| {
        let first = |g: &CriterionGroup| {
            criteria
                .iter()
                .find(|c| c.id == g.anchor())
                .map(|c| c.first_seen_at)
                .unwrap_or_default()
        };
        first(a).cmp(&first(b)).then_with(|| a.group_id.cmp(&b.group_id))
    });
    groups
}

/// `members` must be sorted by (first_seen_at, id).
fn build_group(
    members: &[&CriterionCandidate],
    attention: &BTreeMap<String, f64>,
    manual_labels: &ManualLabels,
) -> CriterionGroup {
    let anchor = &members[0].id;
    let manual = members.iter().find_map(|m| manual_labels.get(&m.id));
    let (label, pinned_label_manual) = match manual {
        Some(label) => (label.clone(), true),
        None => {
            let mut best = members[0];
            for m in &members[1..] {
                let score = |c: &CriterionCandidate| attention.get(&c.id).copied().unwrap_or(0.0);
                if score(m) > score(best) {
                    best = m;
                }
            }
            (best.name.clone(), false)
        }
    };
    CriterionGroup {
        group_id: group_id_for_anchor(anchor),
        member_criterion_ids: members.iter().map(|m| m.id.clone()).collect(),
        label,
        pinned_label_manual,
    }
}

/// Forces every cross pair of the two groups together. Returns the merged
/// group; its id and label are settled by the next clustering pass.
pub fn manual_merge(
    overrides: &mut GroupingOverrides,
    group_a: &CriterionGroup,
    group_b: &CriterionGroup,
) -> CriterionGroup {
    for a in &group_a.member_criterion_ids {
        for b in &group_b.member_criterion_ids {
            if a != b {
                overrides.force(a, b);
            }
        }
    }
    let mut members = group_a.member_criterion_ids.clone();
    for m in &group_b.member_criterion_ids {
        if !members.contains(m) {
            members.push(m.clone());
        }
    }
    CriterionGroup {
        group_id: group_a.group_id.clone(),
        member_criterion_ids: members,
        label: group_a.label.clone(),
        pinned_label_manual: group_a.pinned_label_manual,
    }
}

/// Tombstones every cross-partition pair so clustering keeps them apart.
pub fn manual_split(
    overrides: &mut GroupingOverrides,
    group: &CriterionGroup,
    partition: &[Vec<String>],
) -> Result<Vec<CriterionGroup>, GroupingError> {
    let members: BTreeSet<&String> = group.member_criterion_ids.iter().collect();
    let mut seen: BTreeSet<&String> = BTreeSet::new();
    if partition.len() < 2 || partition.iter().any(Vec::is_empty) {
        return Err(GroupingError::InvalidPartition);
    }
    for part in partition {
        for id in part {
            if !members.contains(id) || !seen.insert(id) {
                return Err(GroupingError::InvalidPartition);
            }
        }
    }
    if seen.len() != members.len() {
        return Err(GroupingError::InvalidPartition);
    }
    for (i, left) in partition.iter().enumerate() {
        for right in &partition[i + 1..] {
            for a in left {
                for b in right {
                    overrides.forbid(a, b);
                }
            }
        }
    }
    Ok(partition
        .iter()
        .map(|part| CriterionGroup {
            group_id: group_id_for_anchor(&part[0]),
            member_criterion_ids: part.clone(),
            label: String::new(),
            pinned_label_manual: false,
        })
        .collect())
}

/// Session state needed to find overlooked evidence.
pub struct OverlookContext<'a> {
    pub associations: &'a BTreeMap<BlockKey, BlockAssociation>,
    /// Blocks with at least one qualified event.
    pub attended_blocks: &'a BTreeSet<BlockKey>,
    /// Blocks that are never reported (headings).
    pub excluded_blocks: &'a BTreeSet<BlockKey>,
    pub vectors: &'a BTreeMap<String, EmbeddingVector>,
    pub threshold: f64,
    /// Attention of the group; unattended groups have nothing overlooked.
    pub group_score: f64,
}

/// Blocks associated with the group (or a criterion close to its centroid)
/// that received no qualified attention, in association-key order.
pub fn detect_overlooked(group: &CriterionGroup, ctx: &OverlookContext<'_>) -> Vec<BlockKey> {
    if ctx.group_score <= 0.0 {
        return Vec::new();
    }
    let mut related: BTreeSet<&str> = group.member_criterion_ids.iter().map(String::as_str).collect();
    let centroid = EmbeddingVector::mean(group.member_criterion_ids.iter().filter_map(|m| ctx.vectors.get(m)));
    if let Some(centroid) = &centroid {
        for (id, v) in ctx.vectors {
            if v.cosine(centroid) >= ctx.threshold {
                related.insert(id);
            }
        }
    }
    ctx.associations
        .iter()
        .filter(|(key, a)| {
            !ctx.attended_blocks.contains(*key)
                && !ctx.excluded_blocks.contains(*key)
                && a.criterion_ids.iter().any(|c| related.contains(c.as_str()))
        })
        .map(|(key, _)| key.clone())
        .collect()
}

/// Lowercased label used for lexicographic tie-breaks.
pub fn label_sort_key(group: &CriterionGroup) -> String {
    normalize_name(&group.label)
}
