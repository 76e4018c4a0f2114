//! HTTP/JSON front end for iterative stable-ranking discovery.
//!
//! Clients upload a dataset, open a session over a region of interest and call
//! `next` repeatedly; each call returns the next most stable ranking (or top-k
//! result) until the engine runs dry. Verification of a single ranking is a
//! stateless call.
//!
//! Sessions live in memory, expire after an idle timeout and can be written to
//! a JSON snapshot on shutdown. A snapshot stores uploads and call counts only;
//! engines are rebuilt by replaying the calls, which is exact because every
//! engine is deterministic given its parameters.

use std::path::PathBuf;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use tower_http::services::ServeDir;

mod api;
mod error;
mod state;

pub use api::{ConstraintSpec, RoiSpec, SessionParams, SessionRequest, UploadParams, VerifyRequest};
pub use error::ApiError;
pub use state::{AppState, Snapshot};

/// Idle time after which a session is dropped.
pub const DEFAULT_TTL: Duration = Duration::from_secs(3600);

/// Largest accepted request body (CSV uploads).
pub const DEFAULT_BODY_LIMIT: usize = 256 << 20;

#[derive(Clone, Debug)]
pub struct Config {
    pub ttl: Duration,
    /// Directory served at `/`, usually the built explorer bundle.
    pub static_dir: Option<PathBuf>,
    pub body_limit: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self { ttl: DEFAULT_TTL, static_dir: None, body_limit: DEFAULT_BODY_LIMIT }
    }
}

pub fn router(state: AppState) -> Router {
    let config = state.config().clone();
    let app = Router::new()
        .route("/api/health", get(|| async { "ok" }))
        .route("/api/datasets", post(api::upload_dataset))
        .route("/api/datasets/{id}", get(api::get_dataset).delete(api::delete_dataset))
        .route("/api/sessions", post(api::create_session))
        .route("/api/sessions/{id}", get(api::get_session).delete(api::delete_session))
        .route("/api/sessions/{id}/next", post(api::next))
        .route("/api/verify", post(api::verify))
        .layer(DefaultBodyLimit::max(config.body_limit))
        .with_state(state);
    match config.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => app,
    }
}
