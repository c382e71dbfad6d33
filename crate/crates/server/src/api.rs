//! HTTP routes.
//!
//! ```text
//! POST /sessions                                  create a session
//! POST /sessions/{id}/pages                       ingest a captured page
//! POST /sessions/{id}/events                      ingest a signal batch
//! POST /sessions/{id}/actions                     apply a user action
//! GET  /sessions/{id}/state?since=N               snapshot, or diff since N
//! GET  /sessions/{id}/export?format=json|csv|md   export the table
//! GET  /sessions/{id}/push?since=N                server-sent diffs
//! GET  /sessions/{id}/detail?group=G | option=O   detail view
//! GET  /sessions/{id}/snippets/{sid}/teleport     where a snippet came from
//! ```

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};

use engine_core::page_model::default_page_id;
use engine_core::session::{
    Action, EventInput, IngestReport, PageInput, PushDebouncer, Session, SessionConfig, SessionError,
};
use engine_core::table::{DetailTarget, ExportFormat, SCHEMA_VERSION};

use crate::error::ApiError;
use crate::state::{AppState, SessionHandle};

type AppResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/pages", post(ingest_page))
        .route("/sessions/{id}/events", post(ingest_events))
        .route("/sessions/{id}/actions", post(apply_action))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/push", get(push))
        .route("/sessions/{id}/detail", get(detail))
        .route("/sessions/{id}/snippets/{snippet_id}/teleport", get(teleport))
        .with_state(state)
}

/// Response body with the wire schema version alongside.
#[derive(Debug, Serialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

fn versioned<T: Serialize>(body: T) -> Json<Versioned<T>> {
    Json(Versioned { schema_version: SCHEMA_VERSION, body })
}

#[derive(Debug, Serialize)]
struct RevisionBody {
    session_id: String,
    revision: u64,
}

async fn mutate<T: Send + 'static>(
    state: Arc<AppState>,
    id: String,
    f: impl FnOnce(&mut Session) -> Result<T, SessionError> + Send + 'static,
) -> AppResult<T> {
    let handle = state.get(&id)?;
    tokio::task::spawn_blocking(move || state.mutate(&handle, f))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn read<T: Send + 'static>(
    handle: Arc<SessionHandle>,
    f: impl FnOnce(&Session) -> T + Send + 'static,
) -> AppResult<T> {
    tokio::task::spawn_blocking(move || f(&handle.lock()))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    session_id: Option<String>,
    config: Option<SessionConfig>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Option<Json<CreateSession>>, JsonRejection>,
) -> AppResult<impl IntoResponse> {
    let body = body?.map(|Json(b)| b).unwrap_or_default();
    let handle = state.create(body.session_id, body.config)?;
    let session = handle.lock();
    let out = RevisionBody { session_id: session.session_id().to_string(), revision: session.revision() };
    Ok((StatusCode::CREATED, versioned(out)))
}

#[derive(Debug, Serialize)]
struct PageAccepted {
    session_id: String,
    page_id: String,
    revision: u64,
}

async fn ingest_page(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<PageInput>, JsonRejection>,
) -> AppResult<impl IntoResponse> {
    let Json(input) = body?;
    let page_id = input.page_id.clone().unwrap_or_else(|| default_page_id(&input.url, &input.html));
    let revision = mutate(state, id.clone(), move |s| s.ingest_page(input)).await?;
    Ok(versioned(PageAccepted { session_id: id, page_id, revision }))
}

/// A batch, either wrapped or bare.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum EventBatch {
    Wrapped { events: Vec<EventInput> },
    Bare(Vec<EventInput>),
}

async fn ingest_events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<EventBatch>, JsonRejection>,
) -> AppResult<Json<Versioned<IngestReport>>> {
    let events = match body? {
        Json(EventBatch::Wrapped { events }) | Json(EventBatch::Bare(events)) => events,
    };
    let report = mutate(state, id, move |s| s.ingest_events(events)).await?;
    Ok(versioned(report))
}

async fn apply_action(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<Action>, JsonRejection>,
) -> AppResult<impl IntoResponse> {
    let Json(action) = body?;
    let revision = mutate(state, id.clone(), move |s| s.apply_action(action)).await?;
    Ok(versioned(RevisionBody { session_id: id, revision }))
}

#[derive(Debug, Deserialize)]
struct SinceQuery {
    since: Option<u64>,
}

async fn get_state(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<SinceQuery>, QueryRejection>,
) -> AppResult<Response> {
    let Query(q) = query?;
    let handle = state.get(&id)?;
    let body = read(handle, move |s| s.get_state(q.since)).await?;
    Ok(Json(body).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<ExportQuery>, QueryRejection>,
) -> AppResult<Response> {
    let Query(q) = query?;
    let format: ExportFormat = q.format.as_deref().unwrap_or("json").parse().map_err(ApiError::bad_request)?;
    let handle = state.get(&id)?;
    let body = read(handle, move |s| s.export(format)).await?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], body).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetailQuery {
    group: Option<String>,
    option: Option<String>,
}

async fn detail(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<DetailQuery>, QueryRejection>,
) -> AppResult<Response> {
    let Query(q) = query?;
    let target = match (q.group, q.option) {
        (Some(g), None) => DetailTarget::Group(g),
        (None, Some(o)) => DetailTarget::Option(o),
        _ => return Err(ApiError::bad_request("give exactly one of group or option")),
    };
    let handle = state.get(&id)?;
    let view = read(handle, move |s| s.detail(&target)).await?;
    let view = view.map_err(|e| ApiError::not_found(e.to_string()))?;
    Ok(versioned(view).into_response())
}

async fn teleport(
    State(state): State<Arc<AppState>>,
    Path((id, snippet_id)): Path<(String, String)>,
) -> AppResult<Response> {
    let handle = state.get(&id)?;
    let target = read(handle, move |s| s.teleport(&snippet_id)).await?;
    let target = target.map_err(|e| ApiError::not_found(e.to_string()))?;
    Ok(versioned(target).into_response())
}

/// Server-sent `diff` events. Each carries the views that changed since
/// the previous one; ranking changes are paced by the push interval.
async fn push(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<SinceQuery>, QueryRejection>,
) -> AppResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let Query(q) = query?;
    let handle = state.get(&id)?;
    let start = match q.since {
        Some(n) => n,
        None => read(handle.clone(), |s| s.revision()).await?,
    };
    let debouncer = PushDebouncer::new(start, state.push_interval_ms);
    let changes = handle.subscribe();
    let stream = futures::stream::unfold(
        (state, handle, debouncer, changes),
        |(state, handle, mut debouncer, mut changes)| async move {
            loop {
                let now = state.now_ms();
                let polled = {
                    let handle = handle.clone();
                    tokio::task::spawn_blocking(move || {
                        let diff = debouncer.poll(now, &handle.lock());
                        (debouncer, diff)
                    })
                    .await
                };
                let Ok((next, diff)) = polled else { return None };
                debouncer = next;
                if let Some(diff) = diff {
                    let event = Event::default()
                        .event("diff")
                        .id(diff.revision.to_string())
                        .json_data(&diff)
                        .expect("diffs serialize");
                    return Some((Ok(event), (state, handle, debouncer, changes)));
                }
                match debouncer.next_deadline() {
                    Some(due) => {
                        let wait = Duration::from_millis((due - now).max(1) as u64);
                        tokio::select! {
                            changed = changes.changed() => if changed.is_err() { return None },
                            _ = tokio::time::sleep(wait) => {}
                        }
                    }
                    None => {
                        if changes.changed().await.is_err() {
                            return None;
                        }
                    }
                }
            }
        },
    );
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
