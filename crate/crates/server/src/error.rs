//! Error bodies of the wire API.

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use engine_core::session::{ItemRejection, SessionError};
use engine_core::table::SCHEMA_VERSION;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<Vec<ItemRejection>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code, message: message.into(), rejected: None } }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "schema_violation", message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::UnknownSession(_) => Self::new(StatusCode::NOT_FOUND, "unknown_session", message),
            SessionError::SchemaViolation(_) => Self::bad_request(message),
            SessionError::Page(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_page", message),
            SessionError::Action(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_action", message),
            SessionError::AllEventsRejected(rejected) => {
                let mut err = Self::new(StatusCode::UNPROCESSABLE_ENTITY, "all_events_rejected", message);
                err.body.rejected = Some(rejected);
                err
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Envelope {
            schema_version: u32,
            error: ErrorBody,
        }
        (self.status, Json(Envelope { schema_version: SCHEMA_VERSION, error: self.body })).into_response()
    }
}
