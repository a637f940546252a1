//! HTTP service for late-bound email content: image delivery, the JSON
//! management API, and the binding refresh scheduler.

pub mod api;
pub mod config;
pub mod refresh;
pub mod scheduler;
pub mod snippet;
pub mod sources;
pub mod state;

use std::future::Future;

pub use api::{router, CACHE_CONTROL};
pub use config::{parse_base_url, ServerConfig};
pub use refresh::{refresh_once, RefreshFailure, RefreshOutcome};
pub use scheduler::Scheduler;
pub use snippet::{generate_snippet, SnippetOptions};
pub use state::{AppState, StartupError};

/// Serves `state` on `listener` with the scheduler running alongside, until
/// `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let scheduler = tokio::spawn(Scheduler::new(state.clone()).run());
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await;
    scheduler.abort();
    result
}
