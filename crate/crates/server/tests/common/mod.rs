#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use engine_server::config::ServerConfig;
use engine_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const T0: i64 = 1_700_000_000_000;
pub const CORPUS: [&str; 5] = ["carousel_review", "splide_docs", "swiper_docs", "slick_blog", "framework_review"];

pub fn core_fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay.toml")
}

pub fn config() -> ServerConfig {
    ServerConfig::load(&config_path()).unwrap()
}

pub fn app_state(config: &ServerConfig) -> Arc<AppState> {
    Arc::new(AppState::open(config).unwrap())
}

pub fn app() -> Router {
    router(app_state(&config()))
}

pub fn page_body(name: &str, captured_at: i64) -> Value {
    let html = std::fs::read_to_string(core_fixtures().join(format!("corpus/{name}.html"))).unwrap();
    json!({ "page_id": name, "url": format!("https://example.test/{name}"), "html": html, "captured_at": captured_at })
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, _, bytes) = call_raw(app, method, uri, body.map(|b| b.to_string())).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

pub async fn call_raw(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, String, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            Body::from(b)
        }
        None => Body::empty(),
    };
    let response = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, content_type, bytes)
}

/// Creates session `id` and ingests the corpus pages ten minutes apart.
pub async fn corpus_session(app: &Router, id: &str) {
    let (status, _) = call(app, "POST", "/sessions", Some(json!({ "session_id": id }))).await;
    assert_eq!(status, StatusCode::CREATED);
    for (i, name) in CORPUS.iter().enumerate() {
        let (status, body) =
            call(app, "POST", &format!("/sessions/{id}/pages"), Some(page_body(name, T0 + 600_000 * i as i64))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
}
