//! Random session edits resolved against the live state, shared by the
//! property tests.

use proptest::prelude::*;

use super::{page_input, CORPUS};
use engine_core::attention::{Rating, SignalInput, SignalKind};
use engine_core::extraction::CandidateKind;
use engine_core::session::{Action, ActionKind, EventInput, Session};
use engine_core::table::EditTarget;

#[derive(Debug, Clone)]
pub enum Op {
    Events(Vec<(usize, u8)>),
    DeleteOption(usize),
    DeleteCriterion(usize),
    DeleteGroup(usize),
    Move(usize, usize, usize),
    Rate(usize, u8),
    Recapture(usize),
    Pin(usize),
    Reorder(usize, usize),
    Merge(usize, usize),
    Split(usize),
    RenameGroup(usize, String),
    RenameCriterion(usize, String),
    VisibleCount(usize),
    Capture(bool, usize, String),
}

pub fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => prop::collection::vec((any::<usize>(), 0u8..3), 1..6).prop_map(Op::Events),
        1 => any::<usize>().prop_map(Op::DeleteOption),
        1 => any::<usize>().prop_map(Op::DeleteCriterion),
        1 => any::<usize>().prop_map(Op::DeleteGroup),
        1 => (any::<usize>(), any::<usize>(), any::<usize>()).prop_map(|(s, o, g)| Op::Move(s, o, g)),
        1 => (any::<usize>(), 0u8..3).prop_map(|(s, r)| Op::Rate(s, r)),
        1 => (0..CORPUS.len()).prop_map(Op::Recapture),
        1 => any::<usize>().prop_map(Op::Pin),
        1 => (any::<usize>(), 0usize..4).prop_map(|(g, i)| Op::Reorder(g, i)),
        1 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::Merge(a, b)),
        1 => any::<usize>().prop_map(Op::Split),
        1 => (any::<usize>(), name()).prop_map(|(g, n)| Op::RenameGroup(g, n)),
        1 => (any::<usize>(), name()).prop_map(|(c, n)| Op::RenameCriterion(c, n)),
        1 => (1usize..30).prop_map(Op::VisibleCount),
    ]
}

/// Like [`op`], plus manual captures. A capture may bring back a deleted
/// candidate, so tombstone checks use [`op`] alone.
pub fn any_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        6 => op(),
        1 => (any::<bool>(), any::<usize>(), name()).prop_map(|(o, b, n)| Op::Capture(o, b, n)),
    ]
}

fn name() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("Speed".to_string()),
        Just("Price".to_string()),
        Just("RTL".to_string()),
        Just("Developer Experience".to_string()),
        "[A-Z][a-z]{2,8}",
    ]
}

fn pick<T: Clone>(items: &[T], i: usize) -> Option<T> {
    (!items.is_empty()).then(|| items[i % items.len()].clone())
}

fn action(session: &Session, kind: ActionKind) -> Action {
    Action { action_id: String::new(), timestamp: session.core().clock + 1_000, kind }
}

/// Applies one op; ops that target nothing are skipped.
pub fn apply(session: &mut Session, op: &Op) {
    let space = session.derived().space.clone();
    let snippets: Vec<String> = space.snippets.keys().cloned().collect();
    let kind = match op {
        Op::Events(items) => {
            let blocks: Vec<(String, String)> = session
                .pages()
                .iter()
                .flat_map(|p| p.blocks.iter().map(move |b| (p.page_id.clone(), b.block_id.clone())))
                .collect();
            let t = session.core().clock + 5_000;
            let batch = items
                .iter()
                .enumerate()
                .map(|(i, (b, k))| {
                    let (page_id, block_id) = blocks[b % blocks.len()].clone();
                    let kind = [SignalKind::Copy, SignalKind::Highlight, SignalKind::Click][*k as usize];
                    EventInput {
                        event_id: None,
                        signal: SignalInput {
                            kind,
                            page_id,
                            block_id,
                            timestamp: t + 1_000 * i as i64,
                            duration_s: None,
                            text_len: (kind == SignalKind::Highlight).then_some(12),
                            highlight_linked: None,
                        },
                    }
                })
                .collect();
            session.ingest_events(batch).unwrap();
            return;
        }
        Op::Recapture(i) => {
            let at = session.core().clock + 1_000;
            session.ingest_page(page_input(CORPUS[*i], at)).unwrap();
            return;
        }
        Op::DeleteOption(i) => match pick(&space.options, *i) {
            Some(o) => ActionKind::Delete { target: EditTarget::Option(o.id) },
            None => return,
        },
        Op::DeleteCriterion(i) => match pick(&space.criteria, *i) {
            Some(c) => ActionKind::Delete { target: EditTarget::Criterion(c.id) },
            None => return,
        },
        Op::DeleteGroup(i) => match pick(&space.groups, *i) {
            Some(g) => ActionKind::Delete { target: EditTarget::Group(g.group_id) },
            None => return,
        },
        Op::Move(s, o, g) => match (pick(&snippets, *s), pick(&space.options, *o), pick(&space.groups, *g)) {
            (Some(snippet_id), Some(o), Some(g)) => {
                ActionKind::MoveSnippet { snippet_id, option_id: o.id, group_id: g.group_id }
            }
            _ => return,
        },
        Op::Pin(g) => match pick(&space.groups, *g) {
            Some(g) => ActionKind::Pin { group_id: g.group_id },
            None => return,
        },
        Op::Reorder(g, i) => match pick(&space.groups, *g) {
            Some(g) => ActionKind::Reorder { group_id: g.group_id, new_index: *i },
            None => return,
        },
        Op::Merge(a, b) => match (pick(&space.groups, *a), pick(&space.groups, *b)) {
            (Some(a), Some(b)) if a.group_id != b.group_id => {
                ActionKind::Merge { group_a: a.group_id, group_b: b.group_id }
            }
            _ => return,
        },
        Op::Split(g) => {
            let multi: Vec<_> = space.groups.iter().filter(|g| g.member_criterion_ids.len() > 1).cloned().collect();
            match pick(&multi, *g) {
                Some(g) => {
                    let (head, tail) = g.member_criterion_ids.split_at(1);
                    ActionKind::Split { group_id: g.group_id, partition: vec![head.to_vec(), tail.to_vec()] }
                }
                None => return,
            }
        }
        Op::RenameGroup(g, name) => match pick(&space.groups, *g) {
            Some(g) => ActionKind::Rename { target: EditTarget::Group(g.group_id), name: name.clone() },
            None => return,
        },
        Op::RenameCriterion(c, name) => match pick(&space.criteria, *c) {
            Some(c) => ActionKind::Rename { target: EditTarget::Criterion(c.id), name: name.clone() },
            None => return,
        },
        Op::VisibleCount(n) => ActionKind::SetVisibleCount { count: *n },
        Op::Capture(option, b, text) => {
            let blocks: Vec<(String, String)> = session
                .pages()
                .iter()
                .flat_map(|p| p.blocks.iter().map(move |b| (p.page_id.clone(), b.block_id.clone())))
                .collect();
            let (page_id, block_id) = blocks[b % blocks.len()].clone();
            let capture = if *option { CandidateKind::Option } else { CandidateKind::Criterion };
            ActionKind::ManualCapture { capture, text: text.clone(), page_id, block_id: Some(block_id) }
        }
        Op::Rate(s, r) => match pick(&snippets, *s) {
            Some(snippet_id) => {
                ActionKind::SetRating { snippet_id, rating: [Rating::Positive, Rating::Informational, Rating::Negative][*r as usize] }
            }
            None => return,
        },
    };
    let a = action(session, kind);
    session.apply_action(a).unwrap();
}
