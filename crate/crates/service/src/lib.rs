//! HTTP API over the arrowpush engine with file-backed annotation sessions.
//!
//! Routes (all JSON):
//!
//! | route | body |
//! |---|---|
//! | `POST /parse` | `{smiles}` or `{mechsmiles}` |
//! | `POST /layout` | `{smiles}` |
//! | `POST /apply` | `{mechsmiles, state?}` or `{state, arrows}` |
//! | `POST /enumerate` | `{state, max_arrows?, limit?}` |
//! | `POST /infer-arrows` | `{reactant, product}` |
//! | `POST /search` | `{reactants, product, config?}` |
//! | `POST /sessions`, `GET /sessions` | `{reactants, products?, main_product?, reaction_id?, session_id?}` |
//! | `GET`/`DELETE /sessions/{id}` | |
//! | `POST /sessions/{id}/steps` | `{mechsmiles}` or `{arrows}` |
//! | `POST /sessions/{id}/undo`, `/redo` | |
//! | `POST /sessions/{id}/export` | `{tasks?, retro?, forward?, no_product?}`, answers JSONL |
//!
//! Errors are `{error, message, detail}` with a 4xx status: 400 for
//! malformed input, 404 for unknown sessions, 409 for conflicts and 422 when
//! the engine rejects a move.

pub mod api;
pub mod layout;
pub mod policy;
pub mod session;

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use arrowpush::engine::Engine;
use arrowpush::search::{CommandPolicy, HeuristicPolicy, Policy};

pub use api::{router, AppState, Shared};
pub use policy::HttpPolicy;
pub use session::{SessionError, SessionStore};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyBackend {
    Heuristic,
    Http(String),
    /// Program and arguments, whitespace separated.
    Command(String),
}

#[derive(Debug, Clone)]
pub struct Config {
    pub addr: SocketAddr,
    pub session_dir: PathBuf,
    pub policy: PolicyBackend,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            addr: ([127, 0, 0, 1], 8765).into(),
            session_dir: PathBuf::from("sessions"),
            policy: PolicyBackend::Heuristic,
        }
    }
}

impl Config {
    /// Defaults overridden by `ARROWPUSH_ADDR`, `ARROWPUSH_SESSIONS`,
    /// `ARROWPUSH_POLICY_URL` and `ARROWPUSH_POLICY_CMD`.
    pub fn from_env() -> Result<Config, String> {
        let mut c = Config::default();
        if let Ok(a) = std::env::var("ARROWPUSH_ADDR") {
            c.addr = a.parse().map_err(|e| format!("ARROWPUSH_ADDR: {e}"))?;
        }
        if let Ok(d) = std::env::var("ARROWPUSH_SESSIONS") {
            c.session_dir = d.into();
        }
        if let Ok(u) = std::env::var("ARROWPUSH_POLICY_URL") {
            c.policy = PolicyBackend::Http(u);
        } else if let Ok(cmd) = std::env::var("ARROWPUSH_POLICY_CMD") {
            c.policy = PolicyBackend::Command(cmd);
        }
        Ok(c)
    }
}

pub fn build_policy(backend: &PolicyBackend) -> io::Result<Arc<dyn Policy>> {
    Ok(match backend {
        PolicyBackend::Heuristic => Arc::new(HeuristicPolicy::default()),
        PolicyBackend::Http(url) => Arc::new(HttpPolicy::new(url.clone()).map_err(io::Error::other)?),
        PolicyBackend::Command(cmd) => {
            let mut parts = cmd.split_whitespace().map(str::to_string);
            let program = parts.next().ok_or_else(|| io::Error::other("empty policy command"))?;
            let args: Vec<String> = parts.collect();
            Arc::new(CommandPolicy::spawn(&program, &args).map_err(io::Error::other)?)
        }
    })
}

pub fn app_state(config: &Config) -> io::Result<Shared> {
    let engine = Engine::default();
    let store = SessionStore::open(&config.session_dir, engine.clone()).map_err(io::Error::other)?;
    Ok(Arc::new(AppState { engine, store, policy: build_policy(&config.policy)? }))
}

/// Serves until interrupted. Blocks the calling thread.
pub fn serve(config: Config) -> io::Result<()> {
    let state = app_state(&config)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
