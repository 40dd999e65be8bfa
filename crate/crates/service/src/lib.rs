//! HTTP facade over the registry, marketplace and ledger.
//!
//! Every failure is answered with an [`ApiError`] JSON envelope; the status comes from
//! [`error::STATUS_TABLE`].

pub mod error;
mod routes;
pub mod state;
pub mod views;

use std::net::SocketAddr;
use std::sync::Arc;

use tokio::net::TcpListener;

pub use error::{status_for, ApiError};
pub use routes::router;
pub use state::{unix_now, AppState, ServiceConfig, StartupError};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Startup(#[from] StartupError),
    #[error("network: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the data directory, binds the port and serves until ctrl-c.
/// `on_ready` receives the bound address once requests can be accepted.
pub async fn serve(config: ServiceConfig, on_ready: impl FnOnce(SocketAddr)) -> Result<(), ServeError> {
    let port = config.port;
    let state = tokio::task::spawn_blocking(move || AppState::open(config))
        .await
        .map_err(|e| std::io::Error::other(e.to_string()))??;
    let listener = TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], port))).await?;
    on_ready(listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Serves `state` on an already bound listener; used by tests and embedding callers.
pub async fn serve_on(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
