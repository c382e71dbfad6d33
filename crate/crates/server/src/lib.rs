//! HTTP service and replay front end for the decision-support engine.

pub mod api;
pub mod config;
pub mod embedding;
pub mod error;
pub mod replay;
pub mod state;

pub use api::router;
pub use config::ServerConfig;
pub use state::AppState;
