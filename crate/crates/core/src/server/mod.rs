//! The analysis service: layout jobs over HTTP plus the live session relay.
//!
//! ```text
//! POST /jobs?iters=&cooling=&seed=&scheme=&p=&fraction=&sample_seed=   body: graph document
//! GET  /jobs/{id}          job status
//! GET  /jobs/{id}/result   annotated document (409 until done)
//! GET  /healthz
//! GET  /session            WebSocket bridge, length-prefixed datagrams
//! UDP  <udp port>          raw datagrams
//! ```

pub mod blob;
pub mod catalogue;
pub mod http;
pub mod jobs;
pub mod session;

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;
use tokio::net::{TcpListener, UdpSocket};
use tokio::task::JoinHandle;

pub use blob::{BlobStore, LocalBlobStore};
pub use catalogue::{JobCatalogue, JobParams, JobState, LayoutJob};
pub use jobs::{run_pipeline, worker_main, JobError, JobService, Launcher};
pub use session::{Peer, SessionRelay};

use crate::protocol::DEFAULT_MTU;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Jobs(#[from] JobError),
    #[error("bind: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub data_dir: PathBuf,
    pub http_addr: SocketAddr,
    pub udp_addr: SocketAddr,
    pub master_mode: bool,
    pub mtu: usize,
    pub launcher: Launcher,
}

impl ServeConfig {
    pub fn new(data_dir: impl Into<PathBuf>, launcher: Launcher) -> Self {
        ServeConfig {
            data_dir: data_dir.into(),
            http_addr: ([127, 0, 0, 1], 0).into(),
            udp_addr: ([127, 0, 0, 1], 0).into(),
            master_mode: false,
            mtu: DEFAULT_MTU,
            launcher,
        }
    }
}

/// A running server. Dropping it stops the listeners.
pub struct Server {
    pub http_addr: SocketAddr,
    pub udp_addr: SocketAddr,
    pub jobs: Arc<JobService>,
    pub relay: Arc<SessionRelay>,
    tasks: Vec<JoinHandle<()>>,
}

impl Server {
    /// Binds both ports and starts serving in the background of the current runtime.
    pub async fn start(cfg: ServeConfig) -> Result<Server, ServerError> {
        let jobs = Arc::new(JobService::open(&cfg.data_dir, cfg.launcher.clone())?);
        let relay = Arc::new(SessionRelay::new(cfg.mtu, cfg.master_mode));
        let tcp = TcpListener::bind(cfg.http_addr).await?;
        let udp = Arc::new(UdpSocket::bind(cfg.udp_addr).await?);
        let http_addr = tcp.local_addr()?;
        let udp_addr = udp.local_addr()?;

        let app = http::router(http::AppState {
            jobs: jobs.clone(),
            relay: relay.clone(),
        });
        let http_task = tokio::spawn(async move {
            if let Err(e) = axum::serve(tcp, app).await {
                tracing::error!("http server stopped: {e}");
            }
        });
        let udp_task = tokio::spawn(session::run_udp(relay.clone(), udp));
        Ok(Server {
            http_addr,
            udp_addr,
            jobs,
            relay,
            tasks: vec![http_task, udp_task],
        })
    }

    /// Serves until the process is interrupted.
    pub async fn run_until_ctrl_c(self) {
        let _ = tokio::signal::ctrl_c().await;
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}
