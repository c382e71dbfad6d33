//! Behavioral signal triggerings: validation, qualification and scoring.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::page_model::Timestamp;

/// Highlights shorter than this many characters are disqualified.
pub const MIN_HIGHLIGHT_CHARS: u32 = 5;
/// Hover and dwell triggerings must last at least this long.
pub const MIN_STAY_SECONDS: f64 = 2.0;
/// No user action for this long counts as idling.
pub const IDLE_THRESHOLD_MS: i64 = 120_000;
/// A click whose mouse-up lands this close to a highlight on the same block
/// belongs to the selection gesture.
pub const HIGHLIGHT_CLICK_WINDOW_MS: i64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Copy,
    Highlight,
    Click,
    Hover,
    Dwell,
}

impl SignalKind {
    pub fn has_duration(self) -> bool {
        matches!(self, SignalKind::Hover | SignalKind::Dwell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisqualifyReason {
    MinLength,
    HighlightLinked,
    MinDuration,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Qualification {
    Qualified,
    Disqualified(DisqualifyReason),
}

impl Qualification {
    pub fn is_qualified(self) -> bool {
        self == Qualification::Qualified
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("malformed {kind:?} event: {detail}")]
    MalformedEvent { kind: SignalKind, detail: String },
    #[error("event {0} is not qualified")]
    UnqualifiedEvent(String),
}

/// Event payload as sent by the client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalInput {
    pub kind: SignalKind,
    pub page_id: String,
    pub block_id: String,
    pub timestamp: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_len: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight_linked: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEvent {
    pub event_id: String,
    pub kind: SignalKind,
    pub page_id: String,
    pub block_id: String,
    /// Start of the triggering for hover/dwell, the gesture time otherwise.
    pub timestamp: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_len: Option<u32>,
    #[serde(default)]
    pub highlight_linked: bool,
    pub qualification: Qualification,
    pub score: f64,
}

impl SignalEvent {
    /// Validates an input and builds a not-yet-qualified event. Fields that
    /// do not belong to the kind are dropped.
    pub fn from_input(event_id: impl Into<String>, input: SignalInput) -> Result<Self, SignalError> {
        let malformed = |detail: &str| SignalError::MalformedEvent { kind: input.kind, detail: detail.to_string() };
        if input.page_id.is_empty() || input.block_id.is_empty() {
            return Err(malformed("page_id and block_id are required"));
        }
        let (duration_s, text_len, highlight_linked) = match input.kind {
            SignalKind::Hover | SignalKind::Dwell => {
                let d = input.duration_s.ok_or_else(|| malformed("duration_s is required"))?;
                if !d.is_finite() || d < 0.0 {
                    return Err(malformed("duration_s must be a non-negative number"));
                }
                (Some(d), None, false)
            }
            SignalKind::Highlight => {
                let len = input.text_len.ok_or_else(|| malformed("text_len is required"))?;
                (None, Some(len), false)
            }
            SignalKind::Click => (None, None, input.highlight_linked.unwrap_or(false)),
            SignalKind::Copy => (None, None, false),
        };
        Ok(Self {
            event_id: event_id.into(),
            kind: input.kind,
            page_id: input.page_id,
            block_id: input.block_id,
            timestamp: input.timestamp,
            duration_s,
            text_len,
            highlight_linked,
            qualification: Qualification::Qualified,
            score: 0.0,
        })
    }

    pub fn end_timestamp(&self) -> Timestamp {
        match self.duration_s {
            Some(d) => self.timestamp + (d * 1000.0).round() as i64,
            None => self.timestamp,
        }
    }

    pub fn is_qualified(&self) -> bool {
        self.qualification.is_qualified()
    }

    fn block_key(&self) -> (&str, &str) {
        (&self.page_id, &self.block_id)
    }
}

/// Per-kind scoring functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringWeights {
    pub copy: f64,
    pub highlight: f64,
    pub click: f64,
    pub hover_per_second: f64,
    pub hover_cap: f64,
    pub dwell_per_second: f64,
    pub dwell_cap: f64,
}

impl Default for ScoringWeights {
    fn default() -> Self {
        Self {
            copy: 40.0,
            highlight: 20.0,
            click: 20.0,
            hover_per_second: 0.5,
            hover_cap: 10.0,
            dwell_per_second: 0.2,
            dwell_cap: 4.0,
        }
    }
}

impl ScoringWeights {
    /// Every scoring function multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            copy: self.copy * factor,
            highlight: self.highlight * factor,
            click: self.click * factor,
            hover_per_second: self.hover_per_second * factor,
            hover_cap: self.hover_cap * factor,
            dwell_per_second: self.dwell_per_second * factor,
            dwell_cap: self.dwell_cap * factor,
        }
    }

    fn raw_score(&self, kind: SignalKind, duration_s: f64) -> f64 {
        match kind {
            SignalKind::Copy => self.copy,
            SignalKind::Highlight => self.highlight,
            SignalKind::Click => self.click,
            SignalKind::Hover => (self.hover_per_second * duration_s).min(self.hover_cap),
            SignalKind::Dwell => (self.dwell_per_second * duration_s).min(self.dwell_cap),
        }
    }
}

/// Score of a qualified triggering.
pub fn score(event: &SignalEvent) -> Result<f64, SignalError> {
    score_with(event, &ScoringWeights::default())
}

pub fn score_with(event: &SignalEvent, weights: &ScoringWeights) -> Result<f64, SignalError> {
    if !event.is_qualified() {
        return Err(SignalError::UnqualifiedEvent(event.event_id.clone()));
    }
    Ok(weights.raw_score(event.kind, event.duration_s.unwrap_or(0.0)))
}

/// Append-only record of every triggering in a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalLedger {
    events: Vec<SignalEvent>,
    pub idle_threshold_ms: i64,
    pub last_activity_at: Option<Timestamp>,
    #[serde(default)]
    pub weights: ScoringWeights,
}

impl Default for SignalLedger {
    fn default() -> Self {
        Self::new(ScoringWeights::default())
    }
}

impl SignalLedger {
    pub fn new(weights: ScoringWeights) -> Self {
        Self { events: Vec::new(), idle_threshold_ms: IDLE_THRESHOLD_MS, last_activity_at: None, weights }
    }

    pub fn events(&self) -> &[SignalEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn qualified(&self) -> impl Iterator<Item = &SignalEvent> {
        self.events.iter().filter(|e| e.is_qualified())
    }

    /// Appends a validated event and re-evaluates qualification of the
    /// whole ledger.
    pub fn append(&mut self, event: SignalEvent) {
        self.push_unqualified(event);
        self.requalify();
    }

    /// Appends several events with a single re-evaluation pass.
    pub fn extend(&mut self, events: impl IntoIterator<Item = SignalEvent>) {
        for event in events {
            self.push_unqualified(event);
        }
        self.requalify();
    }

    fn push_unqualified(&mut self, event: SignalEvent) {
        let end = event.end_timestamp();
        self.last_activity_at = Some(self.last_activity_at.map_or(end, |t| t.max(end)));
        self.events.push(event);
    }

    /// Recomputes every event's qualification and score from the event set.
    /// Qualification depends only on the set of events, never on arrival
    /// order.
    pub fn requalify(&mut self) {
        let verdicts = qualify_all(&self.events, self.idle_threshold_ms);
        for (event, verdict) in self.events.iter_mut().zip(verdicts) {
            event.qualification = verdict;
            event.score = if verdict.is_qualified() {
                self.weights.raw_score(event.kind, event.duration_s.unwrap_or(0.0))
            } else {
                0.0
            };
        }
    }
}

/// Qualifies `event` against the ledger, as if it were part of it.
pub fn qualify(event: &SignalEvent, ledger: &SignalLedger) -> SignalEvent {
    let mut events: Vec<SignalEvent> = ledger
        .events
        .iter()
        .filter(|e| e.event_id != event.event_id)
        .cloned()
        .collect();
    events.push(event.clone());
    let verdict = *qualify_all(&events, ledger.idle_threshold_ms).last().expect("event present");
    let mut out = event.clone();
    out.qualification = verdict;
    out.score = if verdict.is_qualified() {
        ledger.weights.raw_score(out.kind, out.duration_s.unwrap_or(0.0))
    } else {
        0.0
    };
    out
}

fn qualify_all(events: &[SignalEvent], idle_threshold_ms: i64) -> Vec<Qualification> {
    let linked = highlight_linked_clicks(events);
    let instants = activity_instants(events);
    events
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let reason = match e.kind {
                SignalKind::Highlight if e.text_len.unwrap_or(0) < MIN_HIGHLIGHT_CHARS => {
                    Some(DisqualifyReason::MinLength)
                }
                SignalKind::Click if e.highlight_linked || linked.contains(&i) => {
                    Some(DisqualifyReason::HighlightLinked)
                }
                SignalKind::Hover | SignalKind::Dwell => {
                    let d = e.duration_s.unwrap_or(0.0);
                    if d < MIN_STAY_SECONDS {
                        Some(DisqualifyReason::MinDuration)
                    } else if spans_idle(i, e, &instants, idle_threshold_ms) {
                        Some(DisqualifyReason::Idle)
                    } else {
                        None
                    }
                }
                _ => None,
            };
            reason.map_or(Qualification::Qualified, Qualification::Disqualified)
        })
        .collect()
}

/// Indices of clicks that conclude a selection gesture. Each highlight
/// absorbs at most one click on the same block within the window; the
/// greedy earliest-highlight assignment is a maximum matching because every
/// window has the same width.
fn highlight_linked_clicks(events: &[SignalEvent]) -> BTreeSet<usize> {
    let mut per_block: BTreeMap<(&str, &str), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        match e.kind {
            SignalKind::Highlight => per_block.entry(e.block_key()).or_default().0.push(i),
            SignalKind::Click if !e.highlight_linked => per_block.entry(e.block_key()).or_default().1.push(i),
            _ => {}
        }
    }
    let order = |i: &usize| (events[*i].timestamp, events[*i].event_id.clone());
    let mut linked = BTreeSet::new();
    for (_, (mut highlights, mut clicks)) in per_block {
        if highlights.is_empty() || clicks.is_empty() {
            continue;
        }
        highlights.sort_by_key(order);
        clicks.sort_by_key(order);
        let mut used = vec![false; highlights.len()];
        for c in clicks {
            let t = events[c].timestamp;
            let slot = highlights.iter().enumerate().position(|(j, &h)| {
                !used[j] && (events[h].timestamp - t).abs() <= HIGHLIGHT_CLICK_WINDOW_MS
            });
            if let Some(j) = slot {
                used[j] = true;
                linked.insert(c);
            }
        }
    }
    linked
}

/// (instant, owning event index) for every user action: gesture times, and
/// the start and end of each hover/dwell stay.
fn activity_instants(events: &[SignalEvent]) -> Vec<(Timestamp, usize)> {
    let mut out = Vec::with_capacity(events.len() * 2);
    for (i, e) in events.iter().enumerate() {
        out.push((e.timestamp, i));
        if e.kind.has_duration() {
            out.push((e.end_timestamp(), i));
        }
    }
    out.sort_unstable();
    out
}

/// True when the stay `[start, end]` contains an activity-free window of at
/// least `threshold` milliseconds. Only other events' actions break the
/// window; the stay itself is passive.
fn spans_idle(index: usize, event: &SignalEvent, instants: &[(Timestamp, usize)], threshold: i64) -> bool {
    let (start, end) = (event.timestamp, event.end_timestamp());
    if end - start < threshold {
        return false;
    }
    let lo = instants.partition_point(|(t, _)| *t <= start);
    let mut previous = start;
    for &(t, owner) in &instants[lo..] {
        if t >= end {
            break;
        }
        if owner == index {
            continue;
        }
        if t - previous >= threshold {
            return true;
        }
        previous = t;
    }
    end - previous >= threshold
}
