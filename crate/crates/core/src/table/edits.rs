use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attention::Rating;
use crate::extraction::{dedupe_candidates, Candidate, CriterionCandidate, OptionCandidate, SourceTag};
use crate::grouping::ManualLabels;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum EditTarget {
    Option(String),
    Criterion(String),
    Group(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tombstones {
    pub options: BTreeSet<String>,
    pub criteria: BTreeSet<String>,
}

/// A snippet re-homed by the user. The block's association is replaced by
/// this option and criterion, so its attention follows the move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetMove {
    pub page_id: String,
    pub block_id: String,
    pub option_id: String,
    pub criterion_id: String,
}

/// Old id → surviving id after renames merged candidates.
pub type Redirects = BTreeMap<String, String>;

/// User corrections layered over the automatic passes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Edits {
    pub option_renames: BTreeMap<String, String>,
    pub criterion_renames: BTreeMap<String, String>,
    /// Group labels keyed by anchor criterion id.
    pub group_labels: ManualLabels,
    pub deleted: Tombstones,
    /// Keyed by snippet id.
    pub ratings: BTreeMap<String, Rating>,
    /// Keyed by snippet id.
    pub moves: BTreeMap<String, SnippetMove>,
}

fn apply<S: SourceTag>(
    candidates: Vec<Candidate<S>>,
    renames: &BTreeMap<String, String>,
    deleted: &BTreeSet<String>,
    redirects: &mut Redirects,
) -> Vec<Candidate<S>> {
    let mut renamed: Vec<Candidate<S>> = candidates
        .into_iter()
        .filter(|c| !deleted.contains(&c.id))
        .map(|mut c| {
            if let Some(name) = renames.get(&c.id) {
                c.rename(name);
            }
            c
        })
        .collect();
    renamed.retain(|c| !c.normalized_name.is_empty());
    let keyed: Vec<(String, String)> = renamed.iter().map(|c| (c.id.clone(), c.key())).collect();
    let merged = dedupe_candidates(renamed);
    let survivors: BTreeMap<String, &str> = merged.iter().map(|c| (c.key(), c.id.as_str())).collect();
    for (id, key) in keyed {
        if let Some(&survivor) = survivors.get(&key) {
            if survivor != id {
                redirects.insert(id, survivor.to_string());
            }
        }
    }
    merged
}

/// Drops tombstoned candidates, applies renames, and merges candidates whose
/// new names collide. Deletion is applied first so a rename onto a deleted
/// name does not resurrect or swallow anything.
pub fn apply_candidate_edits(
    options: Vec<OptionCandidate>,
    criteria: Vec<CriterionCandidate>,
    edits: &Edits,
) -> (Vec<OptionCandidate>, Vec<CriterionCandidate>, Redirects) {
    let mut redirects = Redirects::new();
    let options = apply(options, &edits.option_renames, &edits.deleted.options, &mut redirects);
    let criteria = apply(criteria, &edits.criterion_renames, &edits.deleted.criteria, &mut redirects);
    (options, criteria, redirects)
}
