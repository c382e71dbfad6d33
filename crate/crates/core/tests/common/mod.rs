#![allow(dead_code)]

pub mod ops;
pub mod oracle;

use std::path::PathBuf;
use std::sync::Arc;

use engine_core::extraction::FixtureSuggester;
use engine_core::grouping::FixtureEmbedder;
use engine_core::session::{parse_trace, LogRecord, PageInput, Providers, Session, SessionConfig};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Suggester and embedder backed by the fixture files, so every run is
/// deterministic and offline.
pub fn fixture_providers() -> Providers {
    Providers {
        suggester: Arc::new(FixtureSuggester::from_json(&read_fixture("suggester.json")).unwrap()),
        embedder: Arc::new(FixtureEmbedder::from_json(&read_fixture("embeddings.json")).unwrap()),
        ..Providers::default()
    }
}

pub const CORPUS: [&str; 5] = ["carousel_review", "splide_docs", "swiper_docs", "slick_blog", "framework_review"];

pub const T0: i64 = 1_700_000_000_000;

pub fn page_input(name: &str, captured_at: i64) -> PageInput {
    PageInput {
        page_id: Some(name.to_string()),
        url: format!("https://example.test/{name}"),
        html: read_fixture(&format!("corpus/{name}.html")),
        captured_at,
        layout: Vec::new(),
    }
}

pub fn trace_records() -> Vec<LogRecord> {
    parse_trace(&read_fixture("trace.ndjson")).unwrap()
}

pub fn replay_trace() -> Session {
    let (session, rejected) = Session::replay("trace", SessionConfig::default(), fixture_providers(), trace_records());
    assert!(rejected.is_empty(), "trace records rejected: {rejected:?}");
    session
}

pub fn corpus_session() -> Session {
    let mut session = Session::new("corpus", SessionConfig::default(), fixture_providers());
    for (i, name) in CORPUS.iter().enumerate() {
        session.ingest_page(page_input(name, T0 + 600_000 * i as i64)).unwrap();
    }
    session
}
