//! Append-only session log with per-record checksums, plus periodic
//! snapshots.
//!
//! Layout under the store root, per session:
//!
//! ```text
//! <id>/meta       session id and config
//! <id>/log        one accepted record per line: "<crc32 hex> <json>\n"
//! <id>/snapshot   latest core, same line format, replaced atomically
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LogRecord, Providers, Session, SessionConfig, SessionCore};

pub const DEFAULT_SNAPSHOT_EVERY: u64 = 50;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("invalid session id {0:?}")]
    InvalidId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RestoreReport {
    pub records: u64,
    pub from_snapshot: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    schema_version: u32,
    session_id: String,
    config: SessionConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    schema_version: u32,
    core: SessionCore,
}

fn frame(json: &str) -> String {
    format!("{:08x} {json}\n", crc32fast::hash(json.as_bytes()))
}

/// Checks one complete line (without its newline) and returns the payload.
fn unframe(line: &str) -> Result<&str, String> {
    let (crc, json) = line.split_once(' ').ok_or("missing checksum separator")?;
    let expected = u32::from_str_radix(crc, 16).map_err(|_| format!("bad checksum field {crc:?}"))?;
    let actual = crc32fast::hash(json.as_bytes());
    if crc.len() != 8 || expected != actual {
        return Err(format!("checksum mismatch: stored {crc}, computed {actual:08x}"));
    }
    Ok(json)
}

fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
    snapshot_every: u64,
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root, snapshot_every: DEFAULT_SNAPSHOT_EVERY })
    }

    pub fn with_snapshot_every(mut self, n: u64) -> Self {
        self.snapshot_every = n.max(1);
        self
    }

    fn dir(&self, session_id: &str) -> Result<PathBuf, StoreError> {
        let ok = !session_id.is_empty()
            && session_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(StoreError::InvalidId(session_id.to_string()));
        }
        Ok(self.root.join(session_id))
    }

    pub fn log_path(&self, session_id: &str) -> Result<PathBuf, StoreError> {
        Ok(self.dir(session_id)?.join("log"))
    }

    pub fn snapshot_path(&self, session_id: &str) -> Result<PathBuf, StoreError> {
        Ok(self.dir(session_id)?.join("snapshot"))
    }

    pub fn session_ids(&self) -> io::Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join("meta").is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Appends the session's journal to its log, creating the session's
    /// files on first use, and snapshots every `snapshot_every` records.
    pub fn flush(&self, session: &mut Session) -> Result<(), StoreError> {
        let dir = self.dir(session.session_id())?;
        if !dir.join("meta").is_file() {
            fs::create_dir_all(&dir)?;
            let meta = Meta {
                schema_version: crate::table::SCHEMA_VERSION,
                session_id: session.session_id().to_string(),
                config: *session.config(),
            };
            write_atomic(&dir.join("meta"), &frame(&serde_json::to_string(&meta).expect("meta")))?;
        }
        let journal = session.take_journal();
        if journal.is_empty() {
            return Ok(());
        }
        let mut out = String::new();
        for record in &journal {
            out.push_str(&frame(&serde_json::to_string(record).expect("records serialize")));
        }
        let mut log = OpenOptions::new().create(true).append(true).open(dir.join("log"))?;
        log.write_all(out.as_bytes())?;
        log.sync_data()?;

        let after = session.core().records_applied;
        let before = after - journal.len() as u64;
        if after / self.snapshot_every > before / self.snapshot_every {
            self.snapshot(session)?;
        }
        Ok(())
    }

    pub fn snapshot(&self, session: &Session) -> Result<(), StoreError> {
        let snap = Snapshot { schema_version: crate::table::SCHEMA_VERSION, core: session.core().clone() };
        let json = serde_json::to_string(&snap).expect("core serializes");
        write_atomic(&self.snapshot_path(session.session_id())?, &frame(&json))?;
        Ok(())
    }

    /// Rebuilds a session from its snapshot and log. A final record cut off
    /// mid-write is dropped with a warning (and trimmed from the file); a
    /// checksum mismatch on any complete record is `CorruptLog`.
    pub fn restore(&self, session_id: &str, providers: Providers) -> Result<(Session, RestoreReport), StoreError> {
        let dir = self.dir(session_id)?;
        let meta_text = match fs::read_to_string(dir.join("meta")) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::UnknownSession(session_id.into())),
            Err(e) => return Err(e.into()),
        };
        let meta: Meta = unframe(meta_text.trim_end_matches('\n'))
            .and_then(|j| serde_json::from_str(j).map_err(|e| e.to_string()))
            .map_err(|reason| StoreError::CorruptLog { line: 0, reason: format!("meta: {reason}") })?;

        let mut report = RestoreReport::default();
        let (records, valid_len) = self.read_log(&dir.join("log"), &mut report)?;

        let mut session = None;
        match fs::read_to_string(dir.join("snapshot")) {
            Ok(text) => {
                let parsed = unframe(text.trim_end_matches('\n'))
                    .and_then(|j| serde_json::from_str::<Snapshot>(j).map_err(|e| e.to_string()));
                match parsed {
                    Ok(snap) if snap.core.records_applied <= records.len() as u64 => {
                        report.from_snapshot = true;
                        session = Some(Session::from_core(snap.core, providers.clone()));
                    }
                    Ok(_) => report.warnings.push("snapshot is ahead of the log; rebuilding from the log".into()),
                    Err(e) => report.warnings.push(format!("ignoring unreadable snapshot: {e}")),
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        let mut session = session.unwrap_or_else(|| Session::new(&meta.session_id, meta.config, providers));
        let start = session.core().records_applied as usize;
        for (i, record) in records.into_iter().enumerate().skip(start) {
            session
                .apply_record(record)
                .map_err(|e| StoreError::CorruptLog { line: i + 1, reason: format!("record rejected on replay: {e}") })?;
        }
        session.take_journal();
        report.records = session.core().records_applied;

        if let Some(len) = valid_len {
            OpenOptions::new().write(true).open(dir.join("log"))?.set_len(len)?;
        }
        for w in &report.warnings {
            tracing::warn!(session = session_id, "{w}");
        }
        Ok((session, report))
    }

    /// Parsed records, and the byte length to truncate to when the final
    /// record is incomplete.
    fn read_log(&self, path: &Path, report: &mut RestoreReport) -> Result<(Vec<LogRecord>, Option<u64>), StoreError> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), None)),
            Err(e) => return Err(e.into()),
        };
        let mut records = Vec::new();
        let mut offset = 0usize;
        let mut line_no = 0usize;
        while offset < bytes.len() {
            line_no += 1;
            let Some(nl) = bytes[offset..].iter().position(|b| *b == b'\n') else {
                report.warnings.push(format!(
                    "log line {line_no} is truncated ({} bytes); restored up to the last complete record",
                    bytes.len() - offset
                ));
                return Ok((records, Some(offset as u64)));
            };
            let line = std::str::from_utf8(&bytes[offset..offset + nl])
                .map_err(|_| StoreError::CorruptLog { line: line_no, reason: "invalid utf-8".into() })?;
            let json = unframe(line).map_err(|reason| StoreError::CorruptLog { line: line_no, reason })?;
            let record = serde_json::from_str(json)
                .map_err(|e| StoreError::CorruptLog { line: line_no, reason: e.to_string() })?;
            records.push(record);
            offset += nl + 1;
        }
        Ok((records, None))
    }
}
