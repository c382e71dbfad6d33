//! Offline replay of a recorded trace.

use std::path::Path;

use engine_core::session::{parse_trace, ItemRejection, Providers, Session, SessionConfig, TraceParseError};
use engine_core::table::ExportFormat;

/// Session id used for replays, so exports do not depend on the file name.
pub const REPLAY_SESSION_ID: &str = "replay";

/// Folds a newline-delimited trace into a fresh session. Records the
/// session rejects are skipped and reported by position.
pub fn replay_trace(
    text: &str,
    config: SessionConfig,
    providers: Providers,
) -> Result<(Session, Vec<ItemRejection>), TraceParseError> {
    let records = parse_trace(text)?;
    Ok(Session::replay(REPLAY_SESSION_ID, config, providers, records))
}

/// Export format named by `explicit`, else by the output file's extension,
/// else JSON.
pub fn export_format(explicit: Option<&str>, output: Option<&Path>) -> Result<ExportFormat, String> {
    if let Some(f) = explicit {
        return f.parse();
    }
    let ext = output.and_then(|p| p.extension()).and_then(|e| e.to_str()).unwrap_or("json");
    Ok(ext.parse().unwrap_or(ExportFormat::Json))
}
