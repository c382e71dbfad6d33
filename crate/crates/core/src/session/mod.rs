//! Event-sourced session state.
//!
//! A session is a fold over its input log (page ingests, signal batches and
//! user actions). The log and a handful of overlays are the only state; the
//! decision space and every view model are recomputed from them after each
//! accepted record, and the revision counts accepted records.

mod pipeline;
mod push;
mod records;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{ScoringWeights, SignalError, SignalEvent, SignalLedger};
use crate::extraction::{
    manual_capture, AlternativesSuggester, CandidateKind, CriterionCandidate, EntityExtractor,
    ExtractionError, HeuristicEntityExtractor, NoSuggestions, OptionCandidate, Provenance,
    DEFAULT_REPEATED_MENTION_THRESHOLD,
};
use crate::grouping::{
    manual_merge, manual_split, EmbeddingProvider, GroupingError, GroupingOverrides, TrigramEmbedder,
    DEFAULT_SIMILARITY_THRESHOLD,
};
use crate::page_model::{segment_page_with_layout, PageError, PageSnapshot, Timestamp};
use crate::table::{
    export_csv, export_json, export_markdown, render_detail, teleport_target, DetailTarget, DetailViewModel,
    EditTarget, Edits, ExportFormat, ListViewModel, SnippetMove, TableError, TableViewModel, TeleportTarget,
    DEFAULT_VISIBLE_COUNT, SCHEMA_VERSION,
};
use crate::text::normalize_name;

pub use pipeline::{CachedVector, Derived, RankingView};
pub use push::{PushDebouncer, DEFAULT_PUSH_INTERVAL_MS};
pub use records::{parse_trace, write_trace, Action, ActionKind, EventInput, LogRecord, PageInput, TraceParseError};
pub use store::{RestoreReport, SessionStore, StoreError, DEFAULT_SNAPSHOT_EVERY};

pub const DEFAULT_GROUPING_DEBOUNCE_MS: i64 = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub similarity_threshold: f64,
    pub visible_count: usize,
    pub repeated_mention_threshold: usize,
    pub grouping_debounce_ms: i64,
    pub weights: ScoringWeights,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            visible_count: DEFAULT_VISIBLE_COUNT,
            repeated_mention_threshold: DEFAULT_REPEATED_MENTION_THRESHOLD,
            grouping_debounce_ms: DEFAULT_GROUPING_DEBOUNCE_MS,
            weights: ScoringWeights::default(),
        }
    }
}

/// Pluggable extraction and embedding back ends. They must be deterministic
/// for replay to be.
#[derive(Clone)]
pub struct Providers {
    pub entities: Arc<dyn EntityExtractor>,
    pub suggester: Arc<dyn AlternativesSuggester>,
    pub embedder: Arc<dyn EmbeddingProvider>,
}

impl Default for Providers {
    fn default() -> Self {
        Self {
            entities: Arc::new(HeuristicEntityExtractor),
            suggester: Arc::new(NoSuggestions),
            embedder: Arc::new(TrigramEmbedder::default()),
        }
    }
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers").finish_non_exhaustive()
    }
}

/// Last revision at which each view changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewRevisions {
    pub list: u64,
    pub table: u64,
    pub ranking: u64,
}

/// The persistent part of a session. Everything else is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCore {
    pub session_id: String,
    pub config: SessionConfig,
    /// Ingest order.
    pub pages: Vec<PageSnapshot>,
    pub ledger: SignalLedger,
    pub manual_options: Vec<OptionCandidate>,
    pub manual_criteria: Vec<CriterionCandidate>,
    pub edits: Edits,
    pub overrides: GroupingOverrides,
    pub pinned: Vec<String>,
    pub visible_count: usize,
    pub vectors: BTreeMap<String, CachedVector>,
    pub vectors_refreshed_at: Option<Timestamp>,
    /// Latest trace time seen.
    pub clock: Timestamp,
    pub revision: u64,
    pub view_revisions: ViewRevisions,
    /// Accepted log records so far.
    pub records_applied: u64,
}

impl SessionCore {
    fn new(session_id: &str, config: SessionConfig) -> Self {
        Self {
            session_id: session_id.to_string(),
            config,
            pages: Vec::new(),
            ledger: SignalLedger::new(config.weights),
            manual_options: Vec::new(),
            manual_criteria: Vec::new(),
            edits: Edits::default(),
            overrides: GroupingOverrides::default(),
            pinned: Vec::new(),
            visible_count: config.visible_count.max(1),
            vectors: BTreeMap::new(),
            vectors_refreshed_at: None,
            clock: 0,
            revision: 0,
            view_revisions: ViewRevisions::default(),
            records_applied: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error(transparent)]
    Page(#[from] PageError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("every event in the batch was rejected")]
    AllEventsRejected(Vec<ItemRejection>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error("unknown page {0}")]
    UnknownPage(String),
    #[error("name must contain a letter or digit")]
    InvalidName,
    #[error("cannot merge a group with itself")]
    SelfMerge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRejection {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub revision: u64,
    pub accepted: usize,
    pub rejected: Vec<ItemRejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub schema_version: u32,
    pub session_id: String,
    pub revision: u64,
    pub list: ListViewModel,
    pub table: TableViewModel,
    pub ranking: RankingView,
}

/// Views that changed after `since`, at their current value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDiff {
    pub schema_version: u32,
    pub session_id: String,
    pub since: u64,
    pub revision: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list: Option<ListViewModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableViewModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<RankingView>,
}

impl StateDiff {
    pub fn is_empty(&self) -> bool {
        self.list.is_none() && self.table.is_none() && self.ranking.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateResponse {
    Snapshot(StateSnapshot),
    Diff(StateDiff),
}

pub struct Session {
    core: SessionCore,
    providers: Providers,
    memo: pipeline::Memo,
    derived: Derived,
    /// Accepted records not yet handed to a store.
    journal: Vec<LogRecord>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("session_id", &self.core.session_id)
            .field("revision", &self.core.revision)
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(session_id: &str, config: SessionConfig, providers: Providers) -> Self {
        Self::from_core(SessionCore::new(session_id, config), providers)
    }

    /// Rebuilds the derived state of a persisted core. The core is left
    /// exactly as stored.
    pub fn from_core(core: SessionCore, providers: Providers) -> Self {
        let mut session =
            Self { core, providers, memo: pipeline::Memo::default(), derived: Derived::default(), journal: Vec::new() };
        let mut scratch = session.core.clone();
        session.derived = pipeline::recompute(&mut scratch, &session.providers, &mut session.memo);
        session
    }

    /// Replays records into a fresh session. Records the session rejects are
    /// skipped and reported with their position.
    pub fn replay(
        session_id: &str,
        config: SessionConfig,
        providers: Providers,
        records: impl IntoIterator<Item = LogRecord>,
    ) -> (Self, Vec<ItemRejection>) {
        let mut session = Self::new(session_id, config, providers);
        let mut rejected = Vec::new();
        for (index, record) in records.into_iter().enumerate() {
            if let Err(e) = session.apply_record(record) {
                rejected.push(ItemRejection { index, reason: e.to_string() });
            }
        }
        (session, rejected)
    }

    pub fn session_id(&self) -> &str {
        &self.core.session_id
    }

    pub fn revision(&self) -> u64 {
        self.core.revision
    }

    pub fn core(&self) -> &SessionCore {
        &self.core
    }

    pub fn config(&self) -> &SessionConfig {
        &self.core.config
    }

    pub fn derived(&self) -> &Derived {
        &self.derived
    }

    pub fn providers(&self) -> &Providers {
        &self.providers
    }

    pub fn pages(&self) -> &[PageSnapshot] {
        &self.core.pages
    }

    pub fn ledger(&self) -> &SignalLedger {
        &self.core.ledger
    }

    pub fn take_journal(&mut self) -> Vec<LogRecord> {
        std::mem::take(&mut self.journal)
    }

    pub fn apply_record(&mut self, record: LogRecord) -> Result<u64, SessionError> {
        match record {
            LogRecord::Page(p) => self.ingest_page(p),
            LogRecord::Event(e) => {
                let report = self.ingest_events(vec![e])?;
                Ok(report.revision)
            }
            LogRecord::Events { events } => Ok(self.ingest_events(events)?.revision),
            LogRecord::Action(a) => self.apply_action(a),
        }
    }

    pub fn ingest_page(&mut self, input: PageInput) -> Result<u64, SessionError> {
        let mut page = segment_page_with_layout(&input.html, &input.url, input.captured_at, &input.layout)?;
        if let Some(id) = &input.page_id {
            if id.trim().is_empty() {
                return Err(SessionError::SchemaViolation("page_id must not be empty".into()));
            }
            page.page_id = id.clone();
        }
        match self.core.pages.iter_mut().find(|p| p.page_id == page.page_id) {
            Some(existing) => *existing = page,
            None => self.core.pages.push(page),
        }
        self.memo.invalidate();
        self.commit(LogRecord::Page(input));
        Ok(self.core.revision)
    }

    /// Applies the valid events of a batch as one revision. Invalid events
    /// are reported and leave no trace.
    pub fn ingest_events(&mut self, batch: Vec<EventInput>) -> Result<IngestReport, SessionError> {
        let mut ids: BTreeSet<String> = self.core.ledger.events().iter().map(|e| e.event_id.clone()).collect();
        let mut accepted_inputs = Vec::new();
        let mut accepted = Vec::new();
        let mut rejected = Vec::new();
        for (index, mut input) in batch.into_iter().enumerate() {
            match self.validate_event(&input, &ids) {
                Ok(()) => {
                    let id = input.event_id.clone().unwrap_or_else(|| {
                        let mut n = ids.len();
                        loop {
                            let candidate = format!("ev-{n}");
                            if !ids.contains(&candidate) {
                                break candidate;
                            }
                            n += 1;
                        }
                    });
                    let event = SignalEvent::from_input(id.clone(), input.signal.clone()).expect("validated");
                    ids.insert(id.clone());
                    input.event_id = Some(id);
                    accepted.push(event);
                    accepted_inputs.push(input);
                }
                Err(reason) => rejected.push(ItemRejection { index, reason }),
            }
        }
        if accepted.is_empty() {
            return if rejected.is_empty() {
                Ok(IngestReport { revision: self.core.revision, accepted: 0, rejected })
            } else {
                Err(SessionError::AllEventsRejected(rejected))
            };
        }
        let count = accepted.len();
        self.core.ledger.extend(accepted);
        let record = if accepted_inputs.len() == 1 {
            LogRecord::Event(accepted_inputs.pop().expect("one"))
        } else {
            LogRecord::Events { events: accepted_inputs }
        };
        self.commit(record);
        Ok(IngestReport { revision: self.core.revision, accepted: count, rejected })
    }

    fn validate_event(&self, input: &EventInput, ids: &BTreeSet<String>) -> Result<(), String> {
        if let Some(id) = &input.event_id {
            if id.is_empty() {
                return Err("event_id must not be empty".into());
            }
            if ids.contains(id) {
                return Err(format!("duplicate event_id {id}"));
            }
        }
        SignalEvent::from_input("probe", input.signal.clone()).map_err(|e: SignalError| e.to_string())?;
        let page = self
            .core
            .pages
            .iter()
            .find(|p| p.page_id == input.signal.page_id)
            .ok_or_else(|| format!("unknown page {}", input.signal.page_id))?;
        if page.block(&input.signal.block_id).is_none() {
            return Err(format!("unknown block {} on page {}", input.signal.block_id, page.page_id));
        }
        Ok(())
    }

    pub fn apply_action(&mut self, mut action: Action) -> Result<u64, SessionError> {
        if action.action_id.is_empty() {
            action.action_id = format!("act-{}", self.core.records_applied);
        }
        self.check_and_stage(&action)?;
        self.commit(LogRecord::Action(action));
        Ok(self.core.revision)
    }

    /// Validates `action` against the current revision and writes it into
    /// the overlays. Nothing is touched when validation fails.
    fn check_and_stage(&mut self, action: &Action) -> Result<(), ActionError> {
        let space = &self.derived.space;
        let live = space.live_group_ids();
        let group = |gid: &str| space.group(gid).cloned().ok_or_else(|| TableError::UnknownGroup(gid.to_string()));
        match &action.kind {
            ActionKind::Pin { group_id } => {
                let mut ranking = space.ranking.clone();
                ranking.pin(group_id, &live)?;
                self.core.pinned = ranking.pinned;
            }
            ActionKind::Unpin { group_id } => {
                let mut ranking = space.ranking.clone();
                ranking.unpin(group_id, &live)?;
                self.core.pinned = ranking.pinned;
            }
            ActionKind::Reorder { group_id, new_index } => {
                let mut ranking = space.ranking.clone();
                ranking.reorder(group_id, *new_index, &live)?;
                self.core.pinned = ranking.pinned;
            }
            ActionKind::SetVisibleCount { count } => {
                let mut ranking = space.ranking.clone();
                ranking.set_visible_count(*count)?;
                self.core.visible_count = ranking.visible_count;
            }
            ActionKind::Merge { group_a, group_b } => {
                let (a, b) = (group(group_a)?, group(group_b)?);
                if a.group_id == b.group_id {
                    return Err(ActionError::SelfMerge);
                }
                let mut overrides = self.core.overrides.clone();
                manual_merge(&mut overrides, &a, &b);
                self.core.overrides = overrides;
            }
            ActionKind::Split { group_id, partition } => {
                let g = group(group_id)?;
                let mut overrides = self.core.overrides.clone();
                manual_split(&mut overrides, &g, partition)?;
                self.core.overrides = overrides;
            }
            ActionKind::Rename { target, name } => {
                if normalize_name(name).is_empty() {
                    return Err(ActionError::InvalidName);
                }
                let name = name.trim().to_string();
                match target {
                    EditTarget::Option(id) => {
                        self.require_option(id)?;
                        self.core.edits.option_renames.insert(id.clone(), name);
                    }
                    EditTarget::Criterion(id) => {
                        self.require_criterion(id)?;
                        self.core.edits.criterion_renames.insert(id.clone(), name);
                    }
                    EditTarget::Group(gid) => {
                        let g = group(gid)?;
                        self.core.edits.group_labels.insert(g.anchor().to_string(), name);
                    }
                }
            }
            ActionKind::Delete { target } => match target {
                EditTarget::Option(id) => {
                    self.require_option(id)?;
                    self.core.edits.deleted.options.insert(id.clone());
                }
                EditTarget::Criterion(id) => {
                    self.require_criterion(id)?;
                    self.core.edits.deleted.criteria.insert(id.clone());
                }
                EditTarget::Group(gid) => {
                    let g = group(gid)?;
                    self.core.edits.deleted.criteria.extend(g.member_criterion_ids.iter().cloned());
                }
            },
            ActionKind::SetRating { snippet_id, rating } => {
                if !space.snippets.contains_key(snippet_id) {
                    return Err(TableError::UnknownSnippet(snippet_id.clone()).into());
                }
                self.core.edits.ratings.insert(snippet_id.clone(), *rating);
            }
            ActionKind::MoveSnippet { snippet_id, option_id, group_id } => {
                let snippet = space
                    .snippets
                    .get(snippet_id)
                    .ok_or_else(|| TableError::UnknownSnippet(snippet_id.clone()))?;
                let g = group(group_id)?;
                self.require_option(option_id)?;
                let m = SnippetMove {
                    page_id: snippet.page_id.clone(),
                    block_id: snippet.block_id.clone(),
                    option_id: option_id.clone(),
                    criterion_id: g.anchor().to_string(),
                };
                self.core.edits.moves.insert(snippet_id.clone(), m);
            }
            ActionKind::ManualCapture { capture, text, page_id, block_id } => {
                let page = self
                    .core
                    .pages
                    .iter()
                    .find(|p| &p.page_id == page_id)
                    .ok_or_else(|| ActionError::UnknownPage(page_id.clone()))?;
                let provenance = match block_id {
                    Some(b) if page.block(b).is_some() => Provenance::block(page_id, b),
                    Some(b) => return Err(TableError::UnknownTarget(b.clone()).into()),
                    None => Provenance::page(page_id),
                };
                match capture {
                    CandidateKind::Option => {
                        let c = manual_capture(&mut self.core.manual_options, text, provenance, action.timestamp)?;
                        self.core.edits.deleted.options.remove(&c.id);
                        self.memo.invalidate();
                    }
                    CandidateKind::Criterion => {
                        let c = manual_capture(&mut self.core.manual_criteria, text, provenance, action.timestamp)?;
                        self.core.edits.deleted.criteria.remove(&c.id);
                    }
                }
            }
        }
        Ok(())
    }

    fn require_option(&self, id: &str) -> Result<(), TableError> {
        match self.derived.space.option(id) {
            Some(_) => Ok(()),
            None => Err(TableError::UnknownTarget(id.to_string())),
        }
    }

    fn require_criterion(&self, id: &str) -> Result<(), TableError> {
        match self.derived.space.criteria.iter().any(|c| c.id == id) {
            true => Ok(()),
            false => Err(TableError::UnknownTarget(id.to_string())),
        }
    }

    /// Bumps the revision, recomputes, and stamps the views that changed.
    fn commit(&mut self, record: LogRecord) {
        self.core.clock = self.core.clock.max(record.timestamp());
        self.core.revision += 1;
        self.core.records_applied += 1;
        let next = pipeline::recompute(&mut self.core, &self.providers, &mut self.memo);
        let revision = self.core.revision;
        let views = &mut self.core.view_revisions;
        if next.list != self.derived.list {
            views.list = revision;
        }
        if next.table != self.derived.table {
            views.table = revision;
        }
        if next.ranking != self.derived.ranking {
            views.ranking = revision;
        }
        self.derived = next;
        self.journal.push(record);
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            schema_version: SCHEMA_VERSION,
            session_id: self.core.session_id.clone(),
            revision: self.core.revision,
            list: self.derived.list.clone(),
            table: self.derived.table.clone(),
            ranking: self.derived.ranking.clone(),
        }
    }

    /// Views changed after `since`. A `since` ahead of the session (a
    /// client that saw a lost future) gets every view.
    pub fn diff_since(&self, since: u64) -> StateDiff {
        let views = self.core.view_revisions;
        let all = since > self.core.revision;
        let changed = |at: u64| all || at > since;
        StateDiff {
            schema_version: SCHEMA_VERSION,
            session_id: self.core.session_id.clone(),
            since,
            revision: self.core.revision,
            list: changed(views.list).then(|| self.derived.list.clone()),
            table: changed(views.table).then(|| self.derived.table.clone()),
            ranking: changed(views.ranking).then(|| self.derived.ranking.clone()),
        }
    }

    pub fn get_state(&self, since: Option<u64>) -> StateResponse {
        match since {
            None => StateResponse::Snapshot(self.snapshot()),
            Some(n) => StateResponse::Diff(self.diff_since(n)),
        }
    }

    pub fn detail(&self, target: &DetailTarget) -> Result<DetailViewModel, TableError> {
        render_detail(&self.derived.space, target)
    }

    pub fn teleport(&self, snippet_id: &str) -> Result<TeleportTarget, TableError> {
        teleport_target(&self.derived.space, snippet_id)
    }

    pub fn export(&self, format: ExportFormat) -> String {
        let space = &self.derived.space;
        match format {
            ExportFormat::Json => export_json(space, self.core.revision),
            ExportFormat::Csv => export_csv(space),
            ExportFormat::Markdown => export_markdown(space, self.core.revision),
        }
    }
}
