use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::oneshot;

use crate::config::{ConfigError, TestbedConfig};
use crate::store::{Clock, NewAccount, PhotoLookup, Store, StoreError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("address {addr} already in use")]
    AddressInUse { addr: String },
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("runtime setup failed: {0}")]
    Runtime(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub method: String,
    /// Path plus query, as received.
    pub path: String,
    pub status: u16,
}

struct App {
    store: Store,
    clock: Clock,
    log: Mutex<Vec<LogEntry>>,
}

type Shared = Arc<App>;

/// A running testbed. Dropping the handle shuts the server down.
pub struct ServerHandle {
    addr: SocketAddr,
    app: Shared,
    runtime: Option<tokio::runtime::Runtime>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<std::io::Result<()>>>,
}

impl std::fmt::Debug for ServerHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServerHandle").field("addr", &self.addr).finish()
    }
}

/// Binds synchronously, then serves on a private multi-threaded runtime.
pub fn serve(config: TestbedConfig) -> Result<ServerHandle, ServeError> {
    config.validate()?;
    let addr_text = config.listen_address.clone();
    let listener = std::net::TcpListener::bind(&addr_text).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            ServeError::AddressInUse {
                addr: addr_text.clone(),
            }
        } else {
            ServeError::Bind {
                addr: addr_text.clone(),
                source: e,
            }
        }
    })?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .thread_name("testbed")
        .enable_all()
        .build()?;
    let app = Arc::new(App {
        store: Store::new(&config),
        clock: Clock::new(),
        log: Mutex::new(Vec::new()),
    });
    let router = router(app.clone());
    let (tx, rx) = oneshot::channel::<()>();
    let listener = {
        let _guard = runtime.enter();
        tokio::net::TcpListener::from_std(listener)?
    };
    let task = runtime.spawn(async move {
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%addr, "testbed listening");
    Ok(ServerHandle {
        addr,
        app,
        runtime: Some(runtime),
        shutdown: Some(tx),
        task: Some(task),
    })
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn request_log(&self) -> Vec<LogEntry> {
        self.app.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn request_count(&self) -> usize {
        self.app.log.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn clear_log(&self) {
        self.app.log.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }

    /// Moves server time forward, e.g. past the token TTL.
    pub fn advance_clock(&self, by: Duration) {
        self.app.clock.advance(by);
    }

    pub fn overwrite_photo(&self, user_id: &str, bytes: &[u8]) -> Result<String, StoreError> {
        self.app.store.overwrite_photo(user_id, bytes)
    }

    pub fn live_tokens(&self) -> Vec<String> {
        self.app.store.live_tokens()
    }

    /// Blocks until Ctrl-C, then shuts down.
    pub fn run_until_interrupt(mut self) -> std::io::Result<()> {
        if let Some(rt) = &self.runtime {
            rt.block_on(tokio::signal::ctrl_c())?;
        }
        self.stop();
        Ok(())
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let (Some(rt), Some(task)) = (self.runtime.as_ref(), self.task.take()) {
            let _ = rt.block_on(async { tokio::time::timeout(Duration::from_secs(5), task).await });
        }
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_timeout(Duration::from_secs(1));
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn router(app: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/account", post(create_account))
        .route("/api/photo/{id}", get(truncated_photo).put(upload_photo))
        .route("/api/photo/{prefix}/{token}", get(full_photo))
        .route("/api/drink", post(drink))
        .route("/api/token/refresh", post(refresh))
        .layer(middleware::from_fn_with_state(app.clone(), log_request))
        .with_state(app)
}

async fn log_request(State(app): State<Shared>, req: Request, next: Next) -> Response {
    let method = req.method().to_string();
    let path = req
        .uri()
        .path_and_query()
        .map_or_else(|| req.uri().path().to_string(), |p| p.as_str().to_string());
    let resp = next.run(req).await;
    let entry = LogEntry {
        method,
        path,
        status: resp.status().as_u16(),
    };
    tracing::debug!(?entry, "request");
    app.log.lock().unwrap_or_else(|e| e.into_inner()).push(entry);
    resp
}

fn status(code: u16) -> StatusCode {
    StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
}

fn error(code: StatusCode, msg: &str) -> Response {
    (code, Json(json!({ "error": msg }))).into_response()
}

fn store_error(e: StoreError) -> Response {
    let code = match e {
        StoreError::UnknownUser(_) | StoreError::Disabled => StatusCode::NOT_FOUND,
        StoreError::InvalidInput(_) => StatusCode::BAD_REQUEST,
        StoreError::Unauthorized => StatusCode::UNAUTHORIZED,
        StoreError::SpaceExhausted => StatusCode::SERVICE_UNAVAILABLE,
    };
    error(code, &e.to_string())
}

fn json_body(body: &Bytes) -> Option<Value> {
    serde_json::from_slice(body).ok()
}

fn not_json() -> Response {
    error(StatusCode::BAD_REQUEST, "body must be JSON")
}

fn header_str<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

async fn health() -> &'static str {
    "ok"
}

async fn create_account(State(app): State<Shared>, body: Bytes) -> Response {
    let Some(v) = json_body(&body) else {
        return not_json();
    };
    let text = |k: &str| v.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
    let num = |k: &str| v.get(k).and_then(Value::as_f64).unwrap_or(0.0);
    let req = NewAccount {
        name: text("name"),
        gender: text("gender"),
        birthday: text("birthday"),
        weight_kg: num("weight_kg"),
        height_cm: num("height_cm"),
        age_years: v
            .get("age_years")
            .and_then(Value::as_u64)
            .unwrap_or(0)
            .min(u32::MAX as u64) as u32,
    };
    match app.store.create_account(&req, app.clock.now()) {
        Ok(a) => {
            let mut out = json!({
                "user_id": a.user_id,
                "auth_token": a.auth_token,
                "goal_ml": a.goal_ml,
            });
            if let Some(r) = a.refresh_token {
                out["refresh_token"] = json!(r);
            }
            Json(out).into_response()
        }
        Err(e) => store_error(e),
    }
}

async fn truncated_photo(State(app): State<Shared>, Path(prefix): Path<String>) -> Response {
    let code = app.store.prefix_status(&prefix);
    if code == app.store.oracle_valid_status() {
        Response::builder()
            .status(status(code))
            .header(header::LOCATION, format!("/api/photo/{prefix}/"))
            .body(Body::empty())
            .unwrap_or_else(|_| StatusCode::INTERNAL_SERVER_ERROR.into_response())
    } else {
        status(code).into_response()
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    let v = header_str(headers, "authorization")?;
    let (scheme, token) = v.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
}

async fn full_photo(
    State(app): State<Shared>,
    Path((prefix, token)): Path<(String, String)>,
    headers: HeaderMap,
) -> Response {
    match app.store.photo(&prefix, &token, bearer(&headers), app.clock.now()) {
        PhotoLookup::Found(bytes) => ([(header::CONTENT_TYPE, "image/jpeg")], bytes).into_response(),
        PhotoLookup::Unauthorized => error(StatusCode::UNAUTHORIZED, "session required"),
        PhotoLookup::NotFound => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn upload_photo(
    State(app): State<Shared>,
    Path(user_id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let caller = header_str(&headers, "x-auth-token").and_then(|t| app.store.authenticate(t, app.clock.now()));
    match caller {
        Some(u) if u == user_id => {}
        Some(_) => return error(StatusCode::FORBIDDEN, "not your account"),
        None => return error(StatusCode::UNAUTHORIZED, "missing or expired credential"),
    }
    match app.store.overwrite_photo(&user_id, &body) {
        Ok(token) => Json(json!({ "token": token })).into_response(),
        Err(e) => store_error(e),
    }
}

async fn drink(State(app): State<Shared>, headers: HeaderMap, body: Bytes) -> Response {
    let Some(token) = header_str(&headers, "x-auth-token") else {
        return error(StatusCode::UNAUTHORIZED, "missing credential");
    };
    if app.store.authenticate(token, app.clock.now()).is_none() {
        return error(StatusCode::UNAUTHORIZED, "missing or expired credential");
    }
    let Some(v) = json_body(&body) else {
        return not_json();
    };
    let ml = v.get("ml").and_then(Value::as_f64).unwrap_or(0.0);
    match app.store.record_drink(token, ml, app.clock.now()) {
        Ok(total) => Json(json!({ "recorded": true, "total_ml": total })).into_response(),
        Err(e) => store_error(e),
    }
}

async fn refresh(State(app): State<Shared>, body: Bytes) -> Response {
    if app.store.toggles().token_reuse {
        return store_error(StoreError::Disabled);
    }
    let Some(v) = json_body(&body) else {
        return not_json();
    };
    let Some(r) = v.get("refresh_token").and_then(Value::as_str) else {
        return error(StatusCode::BAD_REQUEST, "refresh_token required");
    };
    match app.store.refresh(r, app.clock.now()) {
        Ok((auth, refresh)) => Json(json!({ "auth_token": auth, "refresh_token": refresh })).into_response(),
        Err(e) => store_error(e),
    }
}
