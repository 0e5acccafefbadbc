//! Labeling service. Hands out paragraph tasks under short leases, records
//! judgments in the append-only label log and serves the browser UI.

mod state;
mod routes;

pub use routes::router;
pub use state::{AppState, ArticleMeta, Clock, Highlight, LabelTask, Progress, ServiceOptions, TaskId};

use std::net::SocketAddr;

/// Serves until the listener fails or ctrl-c arrives.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    let app = router(state);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// True for loopback addresses; anything else exposes an unauthenticated API.
pub fn is_loopback(addr: &SocketAddr) -> bool {
    addr.ip().is_loopback()
}

/// Binds `addr` and serves on a fresh multi-threaded runtime, blocking the
/// caller.
pub fn run_blocking(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    if !is_loopback(&addr) {
        tracing::warn!(%addr, "binding a non-loopback address; the labeling API has no authentication");
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(addr = %listener.local_addr()?, "labeling service listening");
        serve(listener, state).await
    })
}
