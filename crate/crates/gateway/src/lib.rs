//! HTTP face of the learning engine.
//!
//! Request/response endpoints expose the current state, the Q-table, and run
//! control; `GET /api/events` pushes every engine event as server-sent
//! events. Collaborative scenarios route their feedback prompts through
//! `POST /api/feedback`.

mod api;
mod bus;
mod host;

use std::net::SocketAddr;
use std::sync::Arc;

use homelearn_core::runner::Scenario;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use api::{QTableView, StateView, StatusView};
pub use bus::EventBus;
pub use homelearn_core::events::{EngineEvent, FeedbackRequest};
pub use host::{Phase, RunMode};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Engine(#[from] homelearn_core::Error),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Serve(#[source] std::io::Error),
}

/// Router plus engine thread for `scenario`, without a listener.
pub fn app(scenario: Arc<Scenario>) -> Result<axum::Router, GatewayError> {
    let (shared, commands) = host::spawn(scenario)?;
    Ok(api::router(api::AppState { shared, commands }))
}

pub struct RunningService {
    addr: SocketAddr,
    shutdown: oneshot::Sender<()>,
    task: JoinHandle<Result<(), GatewayError>>,
}

impl RunningService {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub async fn shutdown(self) -> Result<(), GatewayError> {
        let _ = self.shutdown.send(());
        self.task.await.expect("server task panicked")
    }

    /// Serves until the process is stopped.
    pub async fn wait(self) -> Result<(), GatewayError> {
        let RunningService { shutdown, task, .. } = self;
        let result = task.await.expect("server task panicked");
        drop(shutdown);
        result
    }
}

/// Binds `addr` and serves the gateway in the background. Port 0 picks a
/// free port; see [`RunningService::local_addr`].
pub async fn serve(scenario: Arc<Scenario>, addr: SocketAddr) -> Result<RunningService, GatewayError> {
    let router = app(scenario)?;
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| GatewayError::Bind { addr, source })?;
    let addr = listener
        .local_addr()
        .map_err(|source| GatewayError::Bind { addr, source })?;
    let (shutdown, signal) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = signal.await;
            })
            .await
            .map_err(GatewayError::Serve)
    });
    Ok(RunningService {
        addr,
        shutdown,
        task,
    })
}
