//! HTTP JSON API over a prepared corpus: facets, documents, keyword search,
//! term reports, small-corpus clustering, the precomputed projection, page
//! thumbnails and relevance-feedback labeling sessions.
//!
//! Corpus artifacts are read once and never mutated. Sessions live in memory,
//! optionally mirrored to snapshot files, and each one is serialized behind
//! its own lock so a ranking requested after a train always sees that train.

pub mod config;
pub mod error;
pub mod routes;
pub mod state;

use std::sync::Arc;

use thiserror::Error;

pub use config::{ServiceConfig, DEFAULT_BIND};
pub use error::{ApiError, ERROR_CODES};
pub use routes::router;
pub use state::{AppState, Corpus, ServiceOptions, TextIndex};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("artifact validation failed: {0}")]
    ArtifactValidationFailed(String),
    #[error("cannot bind {addr}: {source}")]
    BindFailed {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: &str) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::BindFailed { addr: addr.to_string(), source })?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Loads the artifacts named by `config` and serves them.
pub async fn run(config: ServiceConfig) -> Result<(), ServeError> {
    let bind = config.bind.clone();
    let state = tokio::task::spawn_blocking(move || AppState::load(&config))
        .await
        .map_err(|e| ServeError::Io(std::io::Error::other(e)))??;
    serve(Arc::new(state), &bind).await
}
