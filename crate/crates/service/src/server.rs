//! HTTP host for live sessions.
//!
//! Each session is owned by a single task that runs the tick loop. Handlers
//! never touch a `Session` directly: writes go through the task's command
//! queue and reads come from the snapshot it publishes after every tick.

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use airbubble_core::command::{ActionCommand, CommandError, Verb};
use airbubble_core::event::Event;
use airbubble_core::heatmap::HeatmapGrid;
use airbubble_core::protocol::{BubblePayload, ReadingPayload};
use airbubble_core::scenario::{HeightLabel, Mode, Scenario};
use airbubble_core::session::{Session, SessionConfig, SessionSnapshot, SessionStatus};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::Instant;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Wall-clock seconds between tick-loop wakeups.
    pub loop_period: Duration,
    /// Overrides each scenario's own time scale when set.
    pub time_scale: Option<f64>,
    /// Events kept for `/api/events` replay.
    pub replay_capacity: usize,
    /// Directory for per-session NDJSON event logs.
    pub log_dir: Option<PathBuf>,
    /// Longest an events request waits for news.
    pub max_wait: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            loop_period: Duration::from_millis(20),
            time_scale: None,
            replay_capacity: 20_000,
            log_dir: None,
            max_wait: Duration::from_secs(25),
        }
    }
}

/// What the tick loop publishes for readers.
#[derive(Debug, Clone)]
pub struct Published {
    pub snapshot: SessionSnapshot,
    pub heatmaps: Vec<HeatmapGrid>,
}

impl Published {
    fn of(session: &Session) -> Self {
        Self {
            snapshot: session.snapshot(),
            heatmaps: HeightLabel::ALL.iter().map(|h| session.heatmap(*h)).collect(),
        }
    }

    fn heatmap(&self, height: HeightLabel) -> &HeatmapGrid {
        let i = HeightLabel::ALL
            .iter()
            .position(|h| *h == height)
            .expect("known height");
        &self.heatmaps[i]
    }
}

#[derive(Debug)]
struct EventBuffer {
    events: VecDeque<Event>,
    capacity: usize,
    last_seq: u64,
}

impl EventBuffer {
    fn push(&mut self, e: Event) {
        self.last_seq = e.seq;
        if self.events.len() == self.capacity {
            self.events.pop_front();
        }
        self.events.push_back(e);
    }

    fn first_seq(&self) -> u64 {
        self.events.front().map_or(self.last_seq + 1, |e| e.seq)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CommandReply {
    pub id: u64,
    pub t: f64,
    pub result: Value,
}

type Reply = oneshot::Sender<Result<CommandReply, CommandError>>;

#[derive(Clone)]
struct SessionHandle {
    commands: mpsc::Sender<(ActionCommand, Reply)>,
    published: watch::Receiver<Arc<Published>>,
    events: Arc<Mutex<EventBuffer>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServerConfig,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    default_session: RwLock<Option<String>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                sessions: RwLock::new(HashMap::new()),
                default_session: RwLock::new(None),
                next_id: AtomicU64::new(1),
            }),
        }
    }

    /// Starts a session task; the newest session becomes the default for
    /// requests that do not name one.
    pub fn start_session(&self, scenario: &Scenario, mode: Mode, seed: u64) -> Result<String, ApiError> {
        let mut scenario = scenario.clone();
        if let Some(ts) = self.inner.config.time_scale {
            scenario.params.time_scale = ts;
        }
        let id = format!("s{}", self.inner.next_id.fetch_add(1, Ordering::Relaxed));
        let session = Session::start(id.clone(), &scenario, mode, seed, SessionConfig::default())
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;

        let log = match &self.inner.config.log_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(ApiError::internal)?;
                let file = File::create(dir.join(format!("{id}.ndjson"))).map_err(ApiError::internal)?;
                Some(BufWriter::new(file))
            }
            None => None,
        };
        let events = Arc::new(Mutex::new(EventBuffer {
            events: VecDeque::new(),
            capacity: self.inner.config.replay_capacity.max(1),
            last_seq: 0,
        }));
        let (pub_tx, pub_rx) = watch::channel(Arc::new(Published::of(&session)));
        let (cmd_tx, cmd_rx) = mpsc::channel(256);
        let mut task = SessionTask {
            session,
            commands: cmd_rx,
            published: pub_tx,
            events: Arc::clone(&events),
            log,
            forwarded: 0,
            waiting: HashMap::new(),
        };
        task.forward_events();
        tokio::spawn(task.run(self.inner.config.loop_period));

        let handle = SessionHandle {
            commands: cmd_tx,
            published: pub_rx,
            events,
        };
        self.inner.sessions.write().expect("lock").insert(id.clone(), handle);
        *self.inner.default_session.write().expect("lock") = Some(id.clone());
        Ok(id)
    }

    fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))
    }

    fn default_or(&self, id: Option<&str>) -> Result<SessionHandle, ApiError> {
        match id {
            Some(id) => self.session(id),
            None => {
                let id = self.inner.default_session.read().expect("lock").clone();
                let id = id.ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no session is running"))?;
                self.session(&id)
            }
        }
    }
}

struct SessionTask {
    session: Session,
    commands: mpsc::Receiver<(ActionCommand, Reply)>,
    published: watch::Sender<Arc<Published>>,
    events: Arc<Mutex<EventBuffer>>,
    log: Option<BufWriter<File>>,
    forwarded: u64,
    waiting: HashMap<u64, Reply>,
}

impl SessionTask {
    async fn run(mut self, period: Duration) {
        let mut interval = tokio::time::interval(period);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        let mut last = Instant::now();
        loop {
            tokio::select! {
                req = self.commands.recv() => match req {
                    Some((cmd, reply)) => match self.session.submit(cmd) {
                        Ok(id) => {
                            self.waiting.insert(id, reply);
                        }
                        Err(e) => {
                            let _ = reply.send(Err(e));
                        }
                    },
                    None => break,
                },
                _ = interval.tick() => {
                    let now = Instant::now();
                    let wall = now.duration_since(last).as_secs_f64();
                    last = now;
                    if self.session.status() != SessionStatus::Aborted {
                        // A solver fault aborts the session and is recorded
                        // as an event; readers see it in the snapshot.
                        let _ = self.session.advance(wall);
                    }
                    self.settle();
                }
            }
        }
    }

    fn settle(&mut self) {
        for outcome in self.session.take_outcomes() {
            if let Some(reply) = self.waiting.remove(&outcome.id) {
                let result = match (outcome.result, outcome.error) {
                    (Ok(v), _) => Ok(CommandReply {
                        id: outcome.id,
                        t: outcome.t,
                        result: v,
                    }),
                    (Err(_), Some(e)) => Err(e),
                    (Err(msg), None) => Err(CommandError::Rejected(msg)),
                };
                let _ = reply.send(result);
            }
        }
        if self.session.status() == SessionStatus::Aborted && self.session.pending_commands() == 0 {
            for (_, reply) in self.waiting.drain() {
                let _ = reply.send(Err(CommandError::NotRunning));
            }
        }
        let before = self.forwarded;
        self.forward_events();
        let current = self.published.borrow().snapshot.t;
        if self.forwarded != before || current != self.session.t() {
            self.published.send_replace(Arc::new(Published::of(&self.session)));
        }
    }

    /// Copies new session events into the replay buffer and the log file.
    fn forward_events(&mut self) {
        let fresh = self.session.events().since(self.forwarded);
        if fresh.is_empty() {
            return;
        }
        let mut buf = self.events.lock().expect("lock");
        for e in fresh {
            if let Some(log) = &mut self.log {
                let line = serde_json::to_string(e).expect("events serialize");
                // Logging is best effort; the replay buffer is authoritative.
                let _ = writeln!(log, "{line}");
            }
            buf.push(e.clone());
        }
        self.forwarded = buf.last_seq;
        if let Some(log) = &mut self.log {
            let _ = log.flush();
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.status.as_u16(), self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<CommandError> for ApiError {
    fn from(e: CommandError) -> Self {
        let status = StatusCode::from_u16(e.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.message, "status": self.status.as_u16() }));
        (self.status, body).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/scenarios", get(list_scenarios))
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(get_session))
        .route("/api/measure/{device_id}", get(measure))
        .route("/api/action", post(action))
        .route("/api/bubbles/{id}", get(bubbles))
        .route("/api/heatmap/{id}", get(heatmap))
        .route("/api/events/{id}", get(events))
        .with_state(state)
}

async fn list_scenarios() -> Json<Vec<&'static str>> {
    Json(Scenario::bundled_names().collect())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    scenario: String,
    #[serde(default)]
    mode: Option<Mode>,
    #[serde(default)]
    seed: Option<u64>,
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateSession = parse_body(&body)?;
    let scenario = Scenario::bundled(&req.scenario).map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.to_string()))?;
    let mode = req.mode.unwrap_or(scenario.session.mode);
    let seed = req.seed.unwrap_or(scenario.session.seed);
    let id = state.start_session(&scenario, mode, seed)?;
    let snapshot = state.session(&id)?.published.borrow().snapshot.clone();
    Ok((StatusCode::CREATED, Json(snapshot)).into_response())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionSnapshot>> {
    let handle = state.session(&id)?;
    let snapshot = handle.published.borrow().snapshot.clone();
    Ok(Json(snapshot))
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    session: Option<String>,
}

async fn measure(
    State(state): State<AppState>,
    Path(device_id): Path<String>,
    Query(q): Query<SessionQuery>,
) -> ApiResult<Json<ReadingPayload>> {
    let handle = state.default_or(q.session.as_deref())?;
    let published = Arc::clone(&handle.published.borrow());
    if published.snapshot.status == SessionStatus::Aborted {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "session is not running"));
    }
    published
        .snapshot
        .readings
        .iter()
        .find(|r| r.device_id == device_id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown device {device_id:?}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionRequest {
    #[serde(default)]
    session: Option<String>,
    target: String,
    verb: Verb,
    #[serde(default)]
    args: Value,
}

async fn action(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<CommandReply>> {
    let req: ActionRequest = parse_body(&body)?;
    let handle = state.default_or(req.session.as_deref())?;
    let (tx, rx) = oneshot::channel();
    let cmd = ActionCommand::new(req.target, req.verb, req.args);
    handle
        .commands
        .send((cmd, tx))
        .await
        .map_err(|_| ApiError::from(CommandError::NotRunning))?;
    let reply = rx.await.map_err(|_| ApiError::from(CommandError::NotRunning))?;
    Ok(Json(reply?))
}

#[derive(Debug, Serialize)]
struct BubblesResponse {
    t: f64,
    bubbles: Vec<BubblePayload>,
}

async fn bubbles(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<BubblesResponse>> {
    let handle = state.session(&id)?;
    let published = Arc::clone(&handle.published.borrow());
    Ok(Json(BubblesResponse {
        t: published.snapshot.t,
        bubbles: published.snapshot.bubbles.clone(),
    }))
}

#[derive(Debug, Deserialize)]
struct HeightQuery {
    height: Option<String>,
}

async fn heatmap(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HeightQuery>,
) -> ApiResult<Json<HeatmapGrid>> {
    let handle = state.session(&id)?;
    let height: HeightLabel = q
        .height
        .as_deref()
        .unwrap_or("T")
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let published = Arc::clone(&handle.published.borrow());
    Ok(Json(published.heatmap(height).clone()))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    since: Option<u64>,
    /// Milliseconds to wait for new events before answering empty.
    wait_ms: Option<u64>,
}

#[derive(Debug, Serialize)]
struct EventsResponse {
    last_seq: u64,
    events: Vec<Event>,
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> ApiResult<Json<EventsResponse>> {
    let mut handle = state.session(&id)?;
    let since = q.since.unwrap_or(0);
    let wait = Duration::from_millis(q.wait_ms.unwrap_or(0)).min(state.inner.config.max_wait);
    let deadline = Instant::now() + wait;
    loop {
        {
            let buf = handle.events.lock().expect("lock");
            if since + 1 < buf.first_seq() {
                return Err(ApiError::new(
                    StatusCode::GONE,
                    format!(
                        "events after {since} are no longer buffered; oldest is {}",
                        buf.first_seq()
                    ),
                ));
            }
            if buf.last_seq > since || Instant::now() >= deadline {
                let events = buf.events.iter().filter(|e| e.seq > since).cloned().collect();
                return Ok(Json(EventsResponse {
                    last_seq: buf.last_seq,
                    events,
                }));
            }
        }
        match tokio::time::timeout_at(deadline, handle.published.changed()).await {
            // Timed out: the next pass answers with whatever is there.
            Err(_) => continue,
            Ok(Ok(())) => continue,
            // The session task is gone; nothing new will arrive.
            Ok(Err(_)) => {
                let buf = handle.events.lock().expect("lock");
                let events = buf.events.iter().filter(|e| e.seq > since).cloned().collect();
                return Ok(Json(EventsResponse {
                    last_seq: buf.last_seq,
                    events,
                }));
            }
        }
    }
}
