//! Input records: the ordered log a session is a fold of, and the
//! newline-delimited trace format that carries them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{Rating, SignalInput};
use crate::extraction::CandidateKind;
use crate::page_model::{LayoutHint, Timestamp};
use crate::table::EditTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_id: Option<String>,
    pub url: String,
    pub html: String,
    pub captured_at: Timestamp,
    /// Measured block offsets from the client, when it has them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layout: Vec<LayoutHint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
    #[serde(flatten)]
    pub signal: SignalInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum ActionKind {
    Pin { group_id: String },
    Unpin { group_id: String },
    Reorder { group_id: String, new_index: usize },
    Merge { group_a: String, group_b: String },
    Split { group_id: String, partition: Vec<Vec<String>> },
    Rename { target: EditTarget, name: String },
    Delete { target: EditTarget },
    SetRating { snippet_id: String, rating: Rating },
    MoveSnippet { snippet_id: String, option_id: String, group_id: String },
    SetVisibleCount { count: usize },
    ManualCapture {
        capture: CandidateKind,
        text: String,
        page_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        block_id: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    #[serde(default)]
    pub action_id: String,
    pub timestamp: Timestamp,
    #[serde(flatten)]
    pub kind: ActionKind,
}

/// One line of a trace or of the persisted log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Page(PageInput),
    Event(EventInput),
    /// A client batch, applied as one revision.
    Events { events: Vec<EventInput> },
    Action(Action),
}

impl LogRecord {
    /// Trace time of the record, used as the session clock.
    pub fn timestamp(&self) -> Timestamp {
        match self {
            LogRecord::Page(p) => p.captured_at,
            LogRecord::Event(e) => e.signal.timestamp,
            LogRecord::Events { events } => events.iter().map(|e| e.signal.timestamp).max().unwrap_or(0),
            LogRecord::Action(a) => a.timestamp,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("trace line {line}, column {column}: {message}")]
pub struct TraceParseError {
    /// 1-based.
    pub line: usize,
    /// 1-based, as reported by the JSON parser.
    pub column: usize,
    pub message: String,
}

/// Parses a newline-delimited trace. Blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<LogRecord>, TraceParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |column: usize, e: serde_json::Error| TraceParseError { line: i + 1, column, message: e.to_string() };
        // syntax errors carry a column; schema errors are reported at the
        // start of the record
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(e.column(), e))?;
        let record = serde_json::from_value(value).map_err(|e| err(1, e))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_trace(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}
