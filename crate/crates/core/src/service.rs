//! HTTP lookup service: `GET /health`, `POST /lookup` and the static page
//! at `/`. The engine is immutable once loaded; requests share it freely.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{load_engine, Engine, RunConfig, MAX_K};
use crate::retrieval::Hit;

/// Environment variable overriding the configured port.
pub const PORT_ENV: &str = "REVDICT_PORT";

const DEFAULT_K: usize = 10;

#[derive(Debug, Default)]
pub struct AppState {
    engine: OnceLock<Arc<Engine>>,
    ui_dir: Option<PathBuf>,
}

impl AppState {
    /// State whose engine arrives later through [`AppState::install`].
    pub fn loading(ui_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            engine: OnceLock::new(),
            ui_dir,
        })
    }

    pub fn ready(engine: Engine, ui_dir: Option<PathBuf>) -> Arc<Self> {
        let state = AppState::loading(ui_dir);
        state.install(engine);
        state
    }

    /// Publishes the engine; later calls are ignored.
    pub fn install(&self, engine: Engine) {
        let _ = self.engine.set(Arc::new(engine));
    }

    pub fn engine(&self) -> Option<&Arc<Engine>> {
        self.engine.get()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LookupRequest {
    pub definition: String,
    #[serde(default)]
    pub k: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LookupResponse {
    pub results: Vec<Hit>,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let status = if state.engine().is_some() {
        "ok"
    } else {
        "loading"
    };
    Json(Health {
        status: status.into(),
    })
}

async fn lookup(
    State(state): State<Arc<AppState>>,
    body: std::result::Result<Json<LookupRequest>, JsonRejection>,
) -> Response {
    let started = Instant::now();
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e.body_text()),
    };
    if req.definition.trim().is_empty() {
        return error_response(StatusCode::BAD_REQUEST, "definition must not be empty");
    }
    let k = req.k.unwrap_or(DEFAULT_K as i64);
    if !(1..=MAX_K as i64).contains(&k) {
        return error_response(
            StatusCode::BAD_REQUEST,
            format!("k must lie in 1..={MAX_K}, got {k}"),
        );
    }
    let Some(engine) = state.engine().cloned() else {
        return error_response(StatusCode::SERVICE_UNAVAILABLE, "index is loading");
    };
    let result =
        tokio::task::spawn_blocking(move || engine.lookup(&req.definition, k as usize)).await;
    match result {
        Ok(Ok(results)) => Json(LookupResponse {
            results,
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
        })
        .into_response(),
        Ok(Err(e @ Error::InvalidArgument(_))) => {
            error_response(StatusCode::BAD_REQUEST, e.to_string())
        }
        Ok(Err(e)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn index_page(State(state): State<Arc<AppState>>) -> Response {
    let Some(dir) = &state.ui_dir else {
        return error_response(StatusCode::NOT_FOUND, "no UI directory configured");
    };
    match tokio::fs::read(dir.join("index.html")).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], bytes).into_response(),
        Err(_) => error_response(StatusCode::NOT_FOUND, "index.html not found"),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(index_page))
        .route("/health", get(health))
        .route("/lookup", post(lookup))
        .with_state(state)
}

/// Port from [`PORT_ENV`] when set, else the configured one.
pub fn resolve_port(configured: u16) -> Result<u16> {
    match std::env::var(PORT_ENV) {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("{PORT_ENV}={v} is not a valid port"))),
        Err(_) => Ok(configured),
    }
}

/// Binds, answers `/health` immediately and loads the engine in the
/// background. Returns on Ctrl-C, or with the error if loading fails.
pub async fn serve(cfg: RunConfig, manifest: Option<PathBuf>) -> Result<()> {
    let port = resolve_port(cfg.serve.port)?;
    let addr: SocketAddr = format!("{}:{port}", cfg.serve.host)
        .parse()
        .map_err(|e| Error::Config(format!("bad listen address: {e}")))?;
    let state = AppState::loading(cfg.serve.ui_dir.clone());
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("tcp://{addr}"), e))?;
    log::info!("listening on http://{addr}");

    let loader_state = state.clone();
    let loader = tokio::task::spawn_blocking(move || -> Result<()> {
        let started = Instant::now();
        let engine = load_engine(&cfg, manifest.as_deref())?;
        log::info!(
            "engine ready: {} members, {} vocabulary rows, {:.1}s",
            engine.ensemble().members().len(),
            engine.index().map_or(0, |i| i.len()),
            started.elapsed().as_secs_f64()
        );
        loader_state.install(engine);
        Ok(())
    });

    let server = axum::serve(listener, router(state)).with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    });
    let server = async {
        server
            .await
            .map_err(|e| Error::io(format!("tcp://{addr}"), e))
    };
    tokio::pin!(server);
    tokio::select! {
        res = &mut server => res,
        loaded = loader => {
            loaded.map_err(|e| Error::State(e.to_string()))??;
            server.await
        }
    }
}
