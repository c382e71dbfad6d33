//! Evidence snippets captured from attended blocks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::association::BlockKey;
use super::signals::{SignalError, SignalEvent, SignalLedger};
use crate::page_model::{ContentBlock, PageSnapshot, Timestamp};
use crate::text::short_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Positive,
    Negative,
    Informational,
    #[default]
    Unrated,
}

impl Rating {
    pub fn initial(self) -> char {
        match self {
            Rating::Positive => 'P',
            Rating::Negative => 'N',
            Rating::Informational => 'I',
            Rating::Unrated => 'U',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSnippet {
    pub snippet_id: String,
    pub page_id: String,
    pub block_id: String,
    /// Sanitized original markup, for rendering with the page's styling.
    pub html: String,
    pub text: String,
    pub url: String,
    pub scroll_offset: i64,
    pub scroll_offset_estimated: bool,
    pub captured_at: Timestamp,
    pub rating: Rating,
}

impl EvidenceSnippet {
    pub fn key(&self) -> BlockKey {
        BlockKey::new(&self.page_id, &self.block_id)
    }
}

pub fn snippet_id(page_id: &str, block_id: &str) -> String {
    format!("snip-{}", short_hash(&[page_id, block_id], 12))
}

/// Captures the event's block as a snippet, reusing the block's existing
/// snippet when there is one.
pub fn capture_evidence<'s>(
    event: &SignalEvent,
    block: &ContentBlock,
    page: &PageSnapshot,
    snippets: &'s mut BTreeMap<BlockKey, EvidenceSnippet>,
) -> Result<&'s EvidenceSnippet, SignalError> {
    if !event.is_qualified() {
        return Err(SignalError::UnqualifiedEvent(event.event_id.clone()));
    }
    let key = BlockKey::new(&page.page_id, &block.block_id);
    let snippet = snippets.entry(key).or_insert_with(|| EvidenceSnippet {
        snippet_id: snippet_id(&page.page_id, &block.block_id),
        page_id: page.page_id.clone(),
        block_id: block.block_id.clone(),
        html: block.html.clone(),
        text: block.text.clone(),
        url: page.url.clone(),
        scroll_offset: block.scroll_offset,
        scroll_offset_estimated: block.scroll_offset_estimated,
        captured_at: event.timestamp,
        rating: Rating::Unrated,
    });
    snippet.captured_at = snippet.captured_at.min(event.timestamp);
    Ok(snippet)
}

/// Snippets for every block with at least one qualified event. Capture time
/// is the earliest qualifying event, so the result does not depend on ledger
/// order.
pub fn collect_evidence<'p>(
    ledger: &SignalLedger,
    pages: impl Fn(&str) -> Option<&'p PageSnapshot>,
) -> BTreeMap<BlockKey, EvidenceSnippet> {
    let mut snippets = BTreeMap::new();
    for event in ledger.qualified() {
        let Some(page) = pages(&event.page_id) else { continue };
        let Some(block) = page.block(&event.block_id) else { continue };
        capture_evidence(event, block, page, &mut snippets).expect("qualified event");
    }
    snippets
}
