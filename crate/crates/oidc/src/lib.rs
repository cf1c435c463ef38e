//! OpenID Connect embedding of blinded pseudonym derivation.
//!
//! * [`idp`]: mock identity provider with blinded evaluation and a
//!   conventional pairwise-identifier fallback.
//! * [`sp`]: mock service provider that verifies and unblinds.
//! * [`agent`]: the protocol-aware user agent that rewrites requests.
//! * [`browser`]: a headless browser driving full flows over HTTP.
//! * [`testbed`]: loopback deployments of all services.
//! * [`wire`]: request, discovery and form-post formats.

pub mod agent;
pub mod browser;
pub mod idp;
pub mod sp;
pub mod testbed;
pub mod wire;

use std::net::SocketAddr;
use std::time::{SystemTime, UNIX_EPOCH};

use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use url::Url;

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .expect("clock after 1970")
        .as_secs()
}

/// A listener bound ahead of serving, so its URL can be configured into
/// other services first.
pub struct Bound {
    listener: TcpListener,
    url: Url,
}

impl Bound {
    /// Binds `addr`; port 0 picks a free port.
    pub async fn bind(addr: SocketAddr) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let local = listener.local_addr()?;
        let url = Url::parse(&format!("http://{local}")).expect("socket address forms a URL");
        Ok(Self { listener, url })
    }

    /// Binds a free loopback port.
    pub async fn loopback() -> std::io::Result<Self> {
        Self::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await
    }

    pub fn url(&self) -> &Url {
        &self.url
    }

    pub fn serve(self, router: axum::Router) -> Server {
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let shutdown = async {
                let _ = rx.await;
            };
            if let Err(e) = axum::serve(self.listener, router)
                .with_graceful_shutdown(shutdown)
                .await
            {
                tracing::error!("server stopped: {e}");
            }
        });
        Server {
            url: self.url,
            shutdown: Some(tx),
            task,
        }
    }
}

/// A running HTTP service; stops when dropped.
pub struct Server {
    url: Url,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl Server {
    pub fn url(&self) -> &Url {
        &self.url
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.task).await;
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}
