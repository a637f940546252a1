#![allow(dead_code)]

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use chrono::DateTime;
use latebind_core::ManualClock;
use latebind_server::{parse_base_url, router, AppState, Scheduler, ServerConfig};
use parking_lot::Mutex;
use serde_json::{json, Value};
use tempfile::TempDir;
use tokio::net::TcpListener;

pub struct TestServer {
    pub base: String,
    pub state: AppState,
    pub clock: ManualClock,
    pub client: reqwest::Client,
    pub scheduler: Arc<Scheduler>,
    pub data_dir: PathBuf,
    _dir: Option<TempDir>,
    task: tokio::task::JoinHandle<()>,
}

pub fn test_config(data_dir: PathBuf, addr: SocketAddr) -> ServerConfig {
    ServerConfig {
        bind: addr,
        base_url: parse_base_url(&format!("http://{addr}")).unwrap(),
        data_dir,
        refresh_floor: Duration::from_secs(1),
        scheduler_poll: Duration::from_millis(50),
        ..ServerConfig::default()
    }
}

impl TestServer {
    /// Starts a server on an ephemeral port with a manual clock. The
    /// scheduler does not run on its own; tests drive it with `tick`.
    pub async fn start() -> Self {
        let dir = TempDir::new().unwrap();
        let path = dir.path().to_path_buf();
        let mut s = Self::start_in(path, ManualClock::at_epoch_millis(1_700_000_000_000), |c| c).await;
        s._dir = Some(dir);
        s
    }

    pub async fn start_in(
        data_dir: PathBuf,
        clock: ManualClock,
        tweak: impl FnOnce(ServerConfig) -> ServerConfig,
    ) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let config = tweak(test_config(data_dir.clone(), addr));
        let state = AppState::new(config, Arc::new(clock.clone())).unwrap();
        let app = router(state.clone());
        let task = tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        TestServer {
            base: format!("http://{addr}"),
            scheduler: Scheduler::new(state.clone()),
            state,
            clock,
            client: reqwest::Client::new(),
            data_dir,
            _dir: None,
            task,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    /// Runs one scheduler pass at the current mock time and waits for it.
    pub async fn tick(&self) {
        let now = self.state.now();
        for h in self.scheduler.tick(now) {
            h.await.unwrap();
        }
    }

    pub fn advance_ms(&self, ms: u64) {
        self.clock.advance(Duration::from_millis(ms));
    }

    pub async fn create(&self, body: Value) -> (StatusCode, Value) {
        let resp = self
            .client
            .post(self.url("/api/contents"))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn fetch(&self, url: &str, token: Option<&str>) -> (StatusCode, Vec<u8>) {
        let mut req = self.client.get(url);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        (resp.status(), resp.bytes().await.unwrap().to_vec())
    }

    pub async fn patch(&self, id: &str, token: &str, text: &str) -> (StatusCode, Value) {
        let resp = self
            .client
            .patch(self.url(&format!("/api/contents/{id}")))
            .bearer_auth(token)
            .json(&json!({ "new_text": text }))
            .send()
            .await
            .unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn status_doc(&self, id: &str, token: &str) -> (StatusCode, Value) {
        let resp = self
            .client
            .get(self.url(&format!("/api/contents/{id}")))
            .bearer_auth(token)
            .send()
            .await
            .unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub fn stop(self) {
        self.task.abort();
    }
}

pub fn ts(ms: i64) -> latebind_core::Timestamp {
    DateTime::from_timestamp_millis(ms).unwrap()
}

/// A JSON endpoint whose documents can be changed or taken down, counting
/// requests per path.
#[derive(Clone, Default)]
pub struct MockSource {
    docs: Arc<Mutex<HashMap<String, Option<Value>>>>,
    hits: Arc<Mutex<HashMap<String, usize>>>,
    delay_ms: Arc<AtomicU64>,
    active: Arc<AtomicUsize>,
    max_active: Arc<AtomicUsize>,
    pub base: String,
}

async fn serve_doc(State(src): State<MockSource>, Path(name): Path<String>) -> axum::response::Response {
    *src.hits.lock().entry(name.clone()).or_default() += 1;
    let now = src.active.fetch_add(1, Ordering::SeqCst) + 1;
    src.max_active.fetch_max(now, Ordering::SeqCst);
    let delay = src.delay_ms.load(Ordering::SeqCst);
    if delay > 0 {
        tokio::time::sleep(Duration::from_millis(delay)).await;
    }
    src.active.fetch_sub(1, Ordering::SeqCst);
    match src.docs.lock().get(&name).cloned().flatten() {
        Some(doc) => Json(doc).into_response(),
        None => StatusCode::SERVICE_UNAVAILABLE.into_response(),
    }
}

impl MockSource {
    pub async fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let mut src = MockSource::default();
        src.base = format!("http://{}", listener.local_addr().unwrap());
        let app = Router::new()
            .route("/{name}", get(serve_doc))
            .with_state(src.clone());
        tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        src
    }

    pub fn set(&self, name: &str, doc: Option<Value>) {
        self.docs.lock().insert(name.to_string(), doc);
    }

    pub fn url(&self, name: &str) -> String {
        format!("{}/{name}", self.base)
    }

    pub fn hits(&self, name: &str) -> usize {
        self.hits.lock().get(name).copied().unwrap_or(0)
    }

    /// Makes every response wait `ms` milliseconds.
    pub fn set_delay(&self, ms: u64) {
        self.delay_ms.store(ms, Ordering::SeqCst);
    }

    /// Most requests ever served at the same time.
    pub fn max_concurrent(&self) -> usize {
        self.max_active.load(Ordering::SeqCst)
    }

    pub fn reset_hits(&self) {
        self.hits.lock().clear();
    }
}
