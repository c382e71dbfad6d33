//! Push-channel pacing.

use super::{Session, StateDiff};

pub const DEFAULT_PUSH_INTERVAL_MS: i64 = 2_000;

/// Decides when a subscriber gets its next diff. Diffs without ranking
/// changes go out at once. A ranking change waits a full interval from when
/// it was first seen and from the previous ranking push, so bursts of
/// re-ranking coalesce into one diff. Time is supplied by the caller.
#[derive(Debug, Clone)]
pub struct PushDebouncer {
    interval_ms: i64,
    last_pushed_revision: u64,
    pending_since: Option<i64>,
    last_ranking_push_at: Option<i64>,
}

impl PushDebouncer {
    pub fn new(start_revision: u64, interval_ms: i64) -> Self {
        Self { interval_ms, last_pushed_revision: start_revision, pending_since: None, last_ranking_push_at: None }
    }

    pub fn last_pushed_revision(&self) -> u64 {
        self.last_pushed_revision
    }

    /// When a held ranking diff becomes due.
    pub fn next_deadline(&self) -> Option<i64> {
        let pending = self.pending_since?;
        let after_last = self.last_ranking_push_at.map_or(i64::MIN, |t| t + self.interval_ms);
        Some((pending + self.interval_ms).max(after_last))
    }

    pub fn poll(&mut self, now_ms: i64, session: &Session) -> Option<StateDiff> {
        let diff = session.diff_since(self.last_pushed_revision);
        if diff.is_empty() {
            self.last_pushed_revision = diff.revision;
            return None;
        }
        if diff.ranking.is_some() {
            self.pending_since.get_or_insert(now_ms);
            if now_ms < self.next_deadline().expect("pending") {
                return None;
            }
            self.pending_since = None;
            self.last_ranking_push_at = Some(now_ms);
        }
        self.last_pushed_revision = diff.revision;
        Some(diff)
    }
}
