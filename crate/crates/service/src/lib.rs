//! HTTP service for live sessions in which a person plays the caregiver.
//!
//! Each session owns one engine state machine behind its own lock; the
//! session table is a concurrent map, so requests to different sessions
//! never contend. Events are appended to a per-session list and pushed to
//! clients over server-sent events, with replay from a last-seen index.

mod archive;
mod error;
mod events;

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex as StdMutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::HeaderMap;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use babble_core::episode::LikertAnswer;
use babble_core::session::termination_check;
use babble_core::{EpisodeLog, FeedbackCondition, ObjectKind, SamRating, Session, SessionConfig, SessionEvent, SessionPhase};
use dashmap::DashMap;
use futures::stream::{self, Stream, StreamExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Mutex};

pub use archive::{Archive, EntryStatus, IndexEntry, INDEX_FILE};
pub use error::{ApiError, ErrorBody, ErrorCode};
pub use events::{ClientEvent, EventEnvelope};

pub const DEFAULT_FEEDBACK_DURATION_MS: u64 = 2000;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub archive_dir: PathBuf,
    /// Template for new sessions; per-request overrides are merged on top.
    pub base_config: SessionConfig,
    pub feedback_duration_ms: u64,
    pub idle_timeout: Duration,
    /// Seeds the auto-assignment order and the per-session seeds.
    pub assignment_seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            archive_dir: PathBuf::from("archive"),
            base_config: SessionConfig {
                caregiver: None,
                ..SessionConfig::default()
            },
            feedback_duration_ms: DEFAULT_FEEDBACK_DURATION_MS,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            assignment_seed: 0,
        }
    }
}

/// Balanced condition assignment in blocks of two, order drawn per block.
#[derive(Debug)]
struct Assigner {
    order: ChaCha8Rng,
    seeds: ChaCha8Rng,
    block: Vec<FeedbackCondition>,
}

impl Assigner {
    fn new(seed: u64) -> Self {
        let mut order = ChaCha8Rng::seed_from_u64(seed);
        order.set_stream(1);
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        seeds.set_stream(2);
        Self { order, seeds, block: Vec::new() }
    }

    fn next_condition(&mut self) -> FeedbackCondition {
        if self.block.is_empty() {
            self.block = if self.order.random::<bool>() {
                vec![FeedbackCondition::NonDot, FeedbackCondition::Dot]
            } else {
                vec![FeedbackCondition::Dot, FeedbackCondition::NonDot]
            };
        }
        self.block.pop().expect("refilled")
    }

    fn next_seed(&mut self) -> u64 {
        self.seeds.random()
    }
}

struct Inner {
    session: Session,
    babbled_at: Option<Instant>,
    survey: Option<SamRating>,
}

pub struct LiveSession {
    id: String,
    condition: FeedbackCondition,
    created_at: SystemTime,
    inner: Mutex<Inner>,
    events: RwLock<Vec<EventEnvelope>>,
    notify: watch::Sender<u64>,
    closed: AtomicBool,
    last_activity: StdMutex<Instant>,
}

impl LiveSession {
    fn touch(&self) {
        *self.last_activity.lock().expect("activity lock") = Instant::now();
    }

    fn idle_since(&self) -> Instant {
        *self.last_activity.lock().expect("activity lock")
    }

    fn publish(&self, events: Vec<SessionEvent>, duration_ms: u64) -> Vec<EventEnvelope> {
        let mut list = self.events.write().expect("event lock");
        let mut out = Vec::with_capacity(events.len());
        for e in events {
            let env = EventEnvelope {
                index: list.len() as u64 + 1,
                session_id: self.id.clone(),
                event: ClientEvent::from_session(e, duration_ms),
            };
            list.push(env.clone());
            out.push(env);
        }
        let len = list.len() as u64;
        drop(list);
        self.notify.send_replace(len);
        out
    }

    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.notify.send_modify(|_| {});
    }

    fn events_from(&self, after: u64) -> Vec<EventEnvelope> {
        let list = self.events.read().expect("event lock");
        list.iter().skip(after as usize).cloned().collect()
    }
}

struct Shared {
    config: ServiceConfig,
    sessions: DashMap<String, Arc<LiveSession>>,
    assigner: StdMutex<Assigner>,
    archive: Archive,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub phase: SessionPhase,
    pub created_at_ms: u64,
    pub n: usize,
    pub max_iterations: usize,
    pub word: Option<String>,
    pub events: u64,
    pub converged: Option<bool>,
    pub survey: Option<SamRating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceAck {
    pub accepted: bool,
    pub latency_ms: u64,
    pub events: Vec<EventEnvelope>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyAck {
    pub stored: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    #[serde(default)]
    condition: Option<String>,
    #[serde(default)]
    overrides: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChoiceRequest {
    object: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SurveyRequest {
    valence: i64,
    arousal: i64,
    dominance: i64,
    #[serde(default)]
    likert_answers: Vec<LikertRequest>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LikertRequest {
    question: String,
    value: i64,
}

#[derive(Debug, Default, Deserialize)]
pub struct EventsQuery {
    pub last_event_id: Option<u64>,
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn millis(d: Duration) -> u64 {
    d.as_millis().min(u64::MAX as u128) as u64
}

fn rating_field(field: &str, v: i64) -> Result<u8, ApiError> {
    if (1..=5).contains(&v) {
        Ok(v as u8)
    } else {
        Err(ApiError::new(ErrorCode::RangeViolation, format!("{field} = {v} is outside 1..=5")))
    }
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let archive = Archive::new(config.archive_dir.clone());
        let assigner = StdMutex::new(Assigner::new(config.assignment_seed));
        AppState(Arc::new(Shared {
            config,
            sessions: DashMap::new(),
            assigner,
            archive,
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    pub fn archive(&self) -> &Archive {
        &self.0.archive
    }

    fn get(&self, id: &str) -> Result<Arc<LiveSession>, ApiError> {
        let live = self.0.sessions.get(id).map(|r| Arc::clone(r.value())).ok_or_else(|| ApiError::unknown(id))?;
        live.touch();
        Ok(live)
    }

    /// Server-side condition record; never part of a client payload.
    pub fn condition_of(&self, id: &str) -> Option<FeedbackCondition> {
        self.0.sessions.get(id).map(|r| r.condition)
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.len()
    }

    /// Current episode log of a live session.
    pub async fn session_log(&self, id: &str) -> Result<EpisodeLog, ApiError> {
        let live = self.get(id)?;
        let inner = live.inner.lock().await;
        Ok(Self::log_of(&live, &inner))
    }

    fn log_of(live: &LiveSession, inner: &Inner) -> EpisodeLog {
        let mut log = inner.session.to_log();
        log.id = Some(live.id.clone());
        log.survey = inner.survey.clone();
        log
    }

    fn session_config(
        &self,
        condition: FeedbackCondition,
        overrides: Option<serde_json::Value>,
    ) -> Result<SessionConfig, ApiError> {
        let mut value = serde_json::to_value(&self.0.config.base_config).expect("config serializes");
        let mut seed = None;
        if let Some(over) = overrides {
            let serde_json::Value::Object(map) = &over else {
                return Err(ApiError::new(ErrorCode::InvalidConfig, "overrides must be an object"));
            };
            for forbidden in ["condition", "caregiver"] {
                if map.contains_key(forbidden) {
                    return Err(ApiError::new(
                        ErrorCode::InvalidConfig,
                        format!("`{forbidden}` cannot be overridden for live sessions"),
                    ));
                }
            }
            seed = map.get("seed").and_then(|s| s.as_u64());
            merge(&mut value, over);
        }
        let mut config: SessionConfig =
            serde_json::from_value(value).map_err(|e| ApiError::new(ErrorCode::InvalidConfig, e.to_string()))?;
        config.condition = condition;
        config.caregiver = None;
        if seed.is_none() {
            config.seed = self.0.assigner.lock().expect("assigner lock").next_seed();
        }
        Ok(config)
    }

    pub async fn create(&self, body: &[u8]) -> Result<SessionView, ApiError> {
        let req: CreateRequest = if body.iter().all(u8::is_ascii_whitespace) {
            CreateRequest { condition: None, overrides: None }
        } else {
            serde_json::from_slice(body).map_err(|e| ApiError::new(ErrorCode::InvalidConfig, e.to_string()))?
        };
        let explicit = match req.condition.as_deref() {
            None | Some("auto") => None,
            Some(s) => Some(FeedbackCondition::parse(s).ok_or_else(|| {
                ApiError::new(ErrorCode::InvalidConfig, format!("unknown condition `{s}`"))
            })?),
        };
        let probe = self.session_config(explicit.unwrap_or(FeedbackCondition::Dot), req.overrides.clone())?;
        Session::new(probe).map_err(|e| ApiError::new(ErrorCode::InvalidConfig, e.to_string()))?;
        let condition = match explicit {
            Some(c) => c,
            None => self.0.assigner.lock().expect("assigner lock").next_condition(),
        };
        let config = self.session_config(condition, req.overrides)?;
        let session = Session::new(config).map_err(|e| ApiError::new(ErrorCode::InvalidConfig, e.to_string()))?;

        let id = uuid::Uuid::new_v4().simple().to_string();
        let live = Arc::new(LiveSession {
            id: id.clone(),
            condition,
            created_at: SystemTime::now(),
            inner: Mutex::new(Inner {
                session,
                babbled_at: None,
                survey: None,
            }),
            events: RwLock::new(Vec::new()),
            notify: watch::channel(0).0,
            closed: AtomicBool::new(false),
            last_activity: StdMutex::new(Instant::now()),
        });
        self.0.sessions.insert(id.clone(), Arc::clone(&live));
        tracing::info!(session = %id, "session created");
        let mut inner = live.inner.lock().await;
        self.run_until_input(&live, &mut inner).await?;
        Ok(Self::view(&live, &inner))
    }

    fn view(live: &LiveSession, inner: &Inner) -> SessionView {
        let s = &inner.session;
        SessionView {
            id: live.id.clone(),
            phase: s.phase(),
            created_at_ms: live
                .created_at
                .duration_since(UNIX_EPOCH)
                .map(millis)
                .unwrap_or(0),
            n: s.trials().len(),
            max_iterations: s.config().max_iterations,
            word: (s.phase() == SessionPhase::AwaitingObject)
                .then(|| s.current_word().map(str::to_string))
                .flatten(),
            events: live.events.read().expect("event lock").len() as u64,
            converged: s.is_terminated().then(|| s.converged()),
            survey: inner.survey.clone(),
        }
    }

    pub async fn view_of(&self, id: &str) -> Result<SessionView, ApiError> {
        let live = self.get(id)?;
        let inner = live.inner.lock().await;
        Ok(Self::view(&live, &inner))
    }

    /// Advances without input until the caregiver is asked for an object
    /// or the session ends.
    async fn run_until_input(&self, live: &LiveSession, inner: &mut Inner) -> Result<(), ApiError> {
        let duration = self.0.config.feedback_duration_ms;
        loop {
            match inner.session.phase() {
                SessionPhase::AwaitingObject => return Ok(()),
                SessionPhase::Terminated => return self.finish(live, inner).await,
                _ => {}
            }
            let events = inner
                .session
                .advance(None)
                .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
            if events.iter().any(|e| matches!(e, SessionEvent::Babble { .. })) {
                inner.babbled_at = Some(Instant::now());
            }
            live.publish(events, duration);
        }
    }

    async fn finish(&self, live: &LiveSession, inner: &Inner) -> Result<(), ApiError> {
        let log = Self::log_of(live, inner);
        if let Err(e) = self.0.archive.store(&log, EntryStatus::Terminated).await {
            tracing::error!(session = %live.id, error = %e, "archiving failed");
        }
        live.close();
        Ok(())
    }

    pub async fn choose(&self, id: &str, body: &[u8]) -> Result<ChoiceAck, ApiError> {
        let live = self.get(id)?;
        let req: ChoiceRequest =
            serde_json::from_slice(body).map_err(|e| ApiError::new(ErrorCode::BadRequest, e.to_string()))?;
        let object = ObjectKind::parse(&req.object)
            .ok_or_else(|| ApiError::new(ErrorCode::BadRequest, format!("unknown object `{}`", req.object)))?;
        let duration = self.0.config.feedback_duration_ms;

        let mut inner = live.inner.lock().await;
        let phase = inner.session.phase();
        if phase != SessionPhase::AwaitingObject {
            return Err(ApiError::new(
                ErrorCode::WrongPhase,
                format!("choices are accepted only while awaiting an object, phase is {phase:?}"),
            ));
        }
        let latency_ms = inner.babbled_at.map(|t| millis(t.elapsed())).unwrap_or(0);
        let mut published = Vec::new();
        let mut input = Some(object);
        while inner.session.phase() != SessionPhase::Updated {
            let events = inner
                .session
                .advance(input.take())
                .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
            published.extend(live.publish(events, duration));
        }
        inner.session.set_last_latency(latency_ms);

        let done = termination_check(inner.session.rewards(), inner.session.config());
        if done || duration == 0 {
            self.run_until_input(&live, &mut inner).await?;
        } else {
            let state = self.clone();
            let live = Arc::clone(&live);
            tokio::spawn(async move {
                tokio::time::sleep(Duration::from_millis(duration)).await;
                let mut inner = live.inner.lock().await;
                if let Err(e) = state.run_until_input(&live, &mut inner).await {
                    tracing::error!(session = %live.id, error = %e, "advancing after feedback failed");
                }
            });
        }
        Ok(ChoiceAck {
            accepted: true,
            latency_ms,
            events: published,
        })
    }

    pub async fn survey(&self, id: &str, body: &[u8]) -> Result<SurveyAck, ApiError> {
        let live = self.get(id)?;
        let req: SurveyRequest =
            serde_json::from_slice(body).map_err(|e| ApiError::new(ErrorCode::BadRequest, e.to_string()))?;
        let rating = SamRating {
            valence: rating_field("valence", req.valence)?,
            arousal: rating_field("arousal", req.arousal)?,
            dominance: rating_field("dominance", req.dominance)?,
            likert_answers: req
                .likert_answers
                .into_iter()
                .map(|a| {
                    let value = rating_field(&format!("likert_answers.{}", a.question), a.value)?;
                    Ok(LikertAnswer { question: a.question, value })
                })
                .collect::<Result<_, ApiError>>()?,
        };
        let mut inner = live.inner.lock().await;
        if !inner.session.is_terminated() {
            return Err(ApiError::new(ErrorCode::NotTerminated, "the session has not terminated yet"));
        }
        if inner.survey.is_some() {
            return Err(ApiError::new(ErrorCode::DuplicateSurvey, "a survey was already stored"));
        }
        inner.survey = Some(rating);
        let log = Self::log_of(&live, &inner);
        self.0
            .archive
            .store(&log, EntryStatus::Survey)
            .await
            .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
        Ok(SurveyAck { stored: true })
    }

    /// Event stream starting after the given 1-based index; ends once the
    /// session has terminated and every event has been sent.
    pub fn event_stream(&self, id: &str, after: u64) -> Result<impl Stream<Item = EventEnvelope> + Send + 'static, ApiError> {
        let live = self.get(id)?;
        let rx = live.notify.subscribe();
        let s = stream::unfold((live, rx, after), |(live, mut rx, cursor)| async move {
            loop {
                rx.borrow_and_update();
                let batch = live.events_from(cursor);
                if !batch.is_empty() {
                    let next = cursor + batch.len() as u64;
                    return Some((stream::iter(batch), (live, rx, next)));
                }
                if live.closed.load(Ordering::SeqCst) {
                    return None;
                }
                if rx.changed().await.is_err() {
                    return None;
                }
            }
        });
        Ok(s.flatten())
    }

    /// Drops sessions idle for longer than the timeout, as of `now`.
    pub async fn expire_idle(&self, now: Instant) -> Vec<String> {
        let timeout = self.0.config.idle_timeout;
        let stale: Vec<Arc<LiveSession>> = self
            .0
            .sessions
            .iter()
            .filter(|r| now.saturating_duration_since(r.idle_since()) > timeout)
            .map(|r| Arc::clone(r.value()))
            .collect();
        let mut expired = Vec::new();
        for live in stale {
            self.0.sessions.remove(&live.id);
            let trials = live.inner.lock().await.session.trials().len();
            let entry = IndexEntry {
                id: live.id.clone(),
                status: EntryStatus::Expired,
                file: None,
                condition: live.condition,
                trials,
                converged: false,
                survey: false,
            };
            if let Err(e) = self.0.archive.append(entry).await {
                tracing::error!(session = %live.id, error = %e, "index append failed");
            }
            live.close();
            tracing::info!(session = %live.id, "session expired");
            expired.push(live.id.clone());
        }
        expired
    }
}

async fn create_handler(State(state): State<AppState>, body: Bytes) -> Result<Json<SessionView>, ApiError> {
    state.create(&body).await.map(Json)
}

async fn get_handler(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    state.view_of(&id).await.map(Json)
}

async fn choice_handler(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ChoiceAck>, ApiError> {
    state.choose(&id, &body).await.map(Json)
}

async fn survey_handler(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SurveyAck>, ApiError> {
    state.survey(&id, &body).await.map(Json)
}

async fn events_handler(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let header = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|s| s.trim().parse::<u64>().ok());
    let after = header.or(q.last_event_id).unwrap_or(0);
    let events = state.event_stream(&id, after)?.map(|env| {
        let data = serde_json::to_string(&env).expect("event serializes");
        Ok(Event::default().id(env.index.to_string()).data(data))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_handler))
        .route("/sessions/{id}", get(get_handler))
        .route("/sessions/{id}/choice", post(choice_handler))
        .route("/sessions/{id}/survey", post(survey_handler))
        .route("/sessions/{id}/events", get(events_handler))
        .with_state(state)
}

/// Periodically expires idle sessions until the state is dropped elsewhere.
pub fn spawn_sweeper(state: AppState) -> tokio::task::JoinHandle<()> {
    let period = (state.config().idle_timeout / 4).clamp(Duration::from_millis(10), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            state.expire_idle(Instant::now()).await;
        }
    })
}

pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::new(config);
    spawn_sweeper(state.clone());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
