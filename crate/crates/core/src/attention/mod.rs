//! Attention ledger: signal triggerings, their qualification and scores,
//! block associations, and the per-criterion attention sum
//! `A_c = Σ_t I(t, c) · W(t)`.

mod association;
mod evidence;
mod signals;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::page_model::Timestamp;

pub use association::{
    associate_block, associate_pages, placeholder_option, placeholder_option_id, AssociationSource,
    BlockAssociation, BlockKey,
};
pub use evidence::{capture_evidence, collect_evidence, snippet_id, EvidenceSnippet, Rating};
pub use signals::{
    qualify, score, score_with, DisqualifyReason, Qualification, ScoringWeights, SignalError,
    SignalEvent, SignalInput, SignalKind, SignalLedger, HIGHLIGHT_CLICK_WINDOW_MS,
    IDLE_THRESHOLD_MS, MIN_HIGHLIGHT_CHARS, MIN_STAY_SECONDS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionAttention {
    pub criterion_id: String,
    pub score: f64,
    /// Latest contributing event, 0 when nothing contributed.
    pub last_updated: Timestamp,
}

/// Which side of an association an attention sum is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionTarget {
    Criteria,
    Options,
}

/// Sums qualified event scores per criterion. Every id in `criterion_ids`
/// gets an entry, zero when no qualified event touches it.
pub fn accumulate(
    ledger: &SignalLedger,
    associations: &BTreeMap<BlockKey, BlockAssociation>,
    criterion_ids: &[String],
) -> Vec<CriterionAttention> {
    accumulate_for(ledger, associations, criterion_ids, AttentionTarget::Criteria)
}

pub fn accumulate_for(
    ledger: &SignalLedger,
    associations: &BTreeMap<BlockKey, BlockAssociation>,
    ids: &[String],
    target: AttentionTarget,
) -> Vec<CriterionAttention> {
    let mut totals: BTreeMap<&str, (f64, Timestamp)> = ids.iter().map(|id| (id.as_str(), (0.0, 0))).collect();
    for event in ledger.qualified() {
        let key = BlockKey::new(&event.page_id, &event.block_id);
        let Some(association) = associations.get(&key) else { continue };
        let targets = match target {
            AttentionTarget::Criteria => &association.criterion_ids,
            AttentionTarget::Options => &association.option_ids,
        };
        for id in targets {
            if let Some(entry) = totals.get_mut(id.as_str()) {
                entry.0 += event.score;
                entry.1 = entry.1.max(event.timestamp);
            }
        }
    }
    ids.iter()
        .map(|id| {
            let (score, last_updated) = totals[id.as_str()];
            CriterionAttention { criterion_id: id.clone(), score, last_updated }
        })
        .collect()
}
