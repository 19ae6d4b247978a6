//! HTTP service for interactive sampling over uploaded profiles and qDBs.
//!
//! Uploaded data is kept in memory for the life of the process. Weight
//! indexes are built on first use per `(upload, constraint, predicate
//! weights)` and shared by later requests.

mod api;
mod error;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, SampleBody, SampleResponse, Timings, UploadResponse};
pub use error::ApiError;
pub use state::AppState;

/// Runtime settings, usually read from the environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub port: u16,
    /// Uploaded documents are also written here when set.
    pub data_dir: Option<PathBuf>,
    /// Largest accepted profile, in edges.
    pub max_edges: usize,
    /// Largest accepted qDB, in item occurrences.
    pub max_entries: usize,
    /// Largest request body, in bytes.
    pub max_body_bytes: usize,
    /// Largest `k` per sample request.
    pub max_k: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            port: 8080,
            data_dir: None,
            max_edges: 1_000_000,
            max_entries: 1_000_000,
            max_body_bytes: 256 << 20,
            max_k: 100_000,
        }
    }
}

impl Config {
    /// Reads `HUPSAMP_PORT`, `HUPSAMP_DATA_DIR`, `HUPSAMP_MAX_EDGES`,
    /// `HUPSAMP_MAX_ENTRIES`, `HUPSAMP_MAX_BODY_BYTES` and `HUPSAMP_MAX_K`,
    /// keeping defaults for unset variables.
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut c = Config::default();
        let num = |key: &str, default: usize| -> Result<usize, String> {
            match lookup(key) {
                Some(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| format!("{key}={v:?} is not a non-negative integer")),
                None => Ok(default),
            }
        };
        c.port = u16::try_from(num("HUPSAMP_PORT", c.port as usize)?)
            .map_err(|_| "HUPSAMP_PORT is out of range".to_string())?;
        c.data_dir = lookup("HUPSAMP_DATA_DIR").filter(|s| !s.is_empty()).map(PathBuf::from);
        c.max_edges = num("HUPSAMP_MAX_EDGES", c.max_edges)?;
        c.max_entries = num("HUPSAMP_MAX_ENTRIES", c.max_entries)?;
        c.max_body_bytes = num("HUPSAMP_MAX_BODY_BYTES", c.max_body_bytes)?;
        c.max_k = num("HUPSAMP_MAX_K", c.max_k)?;
        Ok(c)
    }
}

/// Binds `0.0.0.0:port` and serves until the process is stopped.
pub async fn serve(config: Config) -> std::io::Result<()> {
    if let Some(dir) = &config.data_dir {
        std::fs::create_dir_all(dir)?;
    }
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let app = router(Arc::new(AppState::new(config)));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}
