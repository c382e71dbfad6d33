//! Independent re-computation of event qualification and scoring, written
//! from the scoring rules rather than from the engine code.

use std::collections::BTreeMap;

use engine_core::attention::{BlockAssociation, BlockKey, SignalEvent, SignalKind};
use engine_core::session::{EventInput, LogRecord};

/// Whether an event scores, and if not, why.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Scored,
    ShortHighlight,
    GestureClick,
    BriefStay,
    IdleStay,
}

pub struct OracleEvent {
    pub id: String,
    pub kind: SignalKind,
    pub page: String,
    pub block: String,
    pub t: i64,
    pub duration: Option<f64>,
    pub text_len: Option<u32>,
    pub linked: bool,
}

impl From<&SignalEvent> for OracleEvent {
    fn from(e: &SignalEvent) -> Self {
        Self {
            id: e.event_id.clone(),
            kind: e.kind,
            page: e.page_id.clone(),
            block: e.block_id.clone(),
            t: e.timestamp,
            duration: e.duration_s,
            text_len: e.text_len,
            linked: e.highlight_linked,
        }
    }
}

pub fn trace_events(records: &[LogRecord]) -> Vec<OracleEvent> {
    let mut out = Vec::new();
    for r in records {
        let batch: Vec<&EventInput> = match r {
            LogRecord::Event(e) => vec![e],
            LogRecord::Events { events } => events.iter().collect(),
            _ => continue,
        };
        for e in batch {
            let s = &e.signal;
            out.push(OracleEvent {
                id: e.event_id.clone().expect("fixture events carry ids"),
                kind: s.kind,
                page: s.page_id.clone(),
                block: s.block_id.clone(),
                t: s.timestamp,
                duration: s.duration_s,
                text_len: s.text_len,
                linked: s.highlight_linked.unwrap_or(false),
            });
        }
    }
    out
}

pub fn oracle_verdicts(events: &[OracleEvent]) -> Vec<Verdict> {
    let n = events.len();
    // selection gestures: each highlight ends at most one click on its block
    // within half a second; clicks claim highlights in time order
    let mut gesture = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| events[a].t.cmp(&events[b].t).then(events[a].id.cmp(&events[b].id)));
    let mut claimed = vec![false; n];
    for &c in &order {
        let ev = &events[c];
        if ev.kind != SignalKind::Click || ev.linked {
            continue;
        }
        let partner = order.iter().copied().find(|&h| {
            let hv = &events[h];
            hv.kind == SignalKind::Highlight
                && !claimed[h]
                && hv.page == ev.page
                && hv.block == ev.block
                && (hv.t - ev.t).abs() <= 500
        });
        if let Some(h) = partner {
            claimed[h] = true;
            gesture[c] = true;
        }
    }

    (0..n)
        .map(|i| {
            let e = &events[i];
            match e.kind {
                SignalKind::Copy => Verdict::Scored,
                SignalKind::Highlight if e.text_len.unwrap_or(0) < 5 => Verdict::ShortHighlight,
                SignalKind::Highlight => Verdict::Scored,
                SignalKind::Click if e.linked || gesture[i] => Verdict::GestureClick,
                SignalKind::Click => Verdict::Scored,
                SignalKind::Hover | SignalKind::Dwell => {
                    let d = e.duration.unwrap();
                    if d < 2.0 {
                        return Verdict::BriefStay;
                    }
                    let start = e.t;
                    let end = e.t + (d * 1000.0).round() as i64;
                    // every instant of user activity from other events inside the stay
                    let mut marks = vec![start, end];
                    for (j, o) in events.iter().enumerate() {
                        if j == i {
                            continue;
                        }
                        let mut instants = vec![o.t];
                        if let Some(od) = o.duration {
                            instants.push(o.t + (od * 1000.0).round() as i64);
                        }
                        marks.extend(instants.into_iter().filter(|&x| x > start && x < end));
                    }
                    marks.sort_unstable();
                    let longest_gap = marks.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
                    if longest_gap >= 120_000 {
                        Verdict::IdleStay
                    } else {
                        Verdict::Scored
                    }
                }
            }
        })
        .collect()
}

pub fn oracle_score(e: &OracleEvent) -> f64 {
    match e.kind {
        SignalKind::Copy => 40.0,
        SignalKind::Highlight | SignalKind::Click => 20.0,
        SignalKind::Hover => (0.5 * e.duration.unwrap()).min(10.0),
        SignalKind::Dwell => (0.2 * e.duration.unwrap()).min(4.0),
    }
}

/// Attention per criterion: scored events summed over the criteria their
/// block is associated with.
pub fn oracle_totals(
    events: &[OracleEvent],
    associations: &BTreeMap<BlockKey, BlockAssociation>,
    criteria: &[String],
) -> BTreeMap<String, f64> {
    let mut totals: BTreeMap<String, f64> = criteria.iter().map(|c| (c.clone(), 0.0)).collect();
    for (e, v) in events.iter().zip(oracle_verdicts(events)) {
        if v != Verdict::Scored {
            continue;
        }
        let Some(a) = associations.get(&BlockKey::new(&e.page, &e.block)) else { continue };
        for c in &a.criterion_ids {
            if let Some(t) = totals.get_mut(c) {
                *t += oracle_score(e);
            }
        }
    }
    totals
}
