//! HTTP and WebSocket front end for live sessions.
//!
//! Each session hands out two capability tokens, one per role. A token is
//! sent in the `x-role-token` header (or `?token=` on the stream) and grants
//! exactly that role's view and actions.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;
use tower_http::services::ServeDir;

use mindgames_core::agents::{LlmPersuader, OptimalPersuader, Persuader, PersuaderKind, RandomPersuader, DEFAULT_MESSAGE_CHARS};
use mindgames_core::analytics::select_game;
use mindgames_core::classify::ClassifierKind;
use mindgames_core::forge::{generate, GenerateOptions};
use mindgames_core::llm::{build_classifier, ChatClient};
use mindgames_core::model::{GameInstance, PayoffMatrix, Proposal, ValenceVector};
use mindgames_core::scenario;
use mindgames_core::session::{
    ChoiceStage, Condition, MessageEvent, Mode, Role, Session, SessionConfig, SessionError, TargetKind,
    DEFAULT_MAX_PERSUADER_TURNS,
};
use mindgames_core::transcript::Line;

pub const TOKEN_HEADER: &str = "x-role-token";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: &'static str,
    reason: String,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, reason: impl Into<String>) -> Self {
        ApiError {
            status,
            error,
            reason: reason.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.error, "reason": self.reason }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, error) = match &e {
            SessionError::Ended => (StatusCode::GONE, "ended"),
            SessionError::OutOfTurn(_) => (StatusCode::CONFLICT, "out_of_turn"),
            SessionError::BudgetExhausted => (StatusCode::CONFLICT, "budget_exhausted"),
            SessionError::AlreadyChosen(_) => (StatusCode::CONFLICT, "already_chosen"),
            SessionError::PreChoiceTooLate => (StatusCode::CONFLICT, "pre_choice_too_late"),
            SessionError::PreChoiceRequired => (StatusCode::CONFLICT, "pre_choice_required"),
            SessionError::BotChooses => (StatusCode::CONFLICT, "bot_chooses"),
            SessionError::StillOpen => (StatusCode::CONFLICT, "still_open"),
            SessionError::Classifier(_) => (StatusCode::BAD_GATEWAY, "classifier_failed"),
            SessionError::InvalidInstance(_) | SessionError::UnknownScenario(_) | SessionError::Config(_) => {
                (StatusCode::BAD_REQUEST, "invalid_config")
            }
        };
        ApiError::new(status, error, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Audience {
    Both,
    Target,
}

#[derive(Debug, Clone)]
struct Envelope {
    seq: usize,
    audience: Audience,
    line: Line,
}

impl Envelope {
    fn visible_to(&self, role: Role) -> bool {
        self.audience == Audience::Both || role == Role::Target
    }

    fn to_json(&self) -> String {
        let mut v = serde_json::to_value(&self.line).expect("lines serialize");
        v["seq"] = json!(self.seq);
        v.to_string()
    }
}

struct Live {
    session: Session,
    agent: Option<Box<dyn Persuader>>,
    log: Vec<Envelope>,
}

struct Entry {
    live: Mutex<Live>,
    persuader_token: String,
    target_token: String,
    tx: broadcast::Sender<Envelope>,
}

impl Entry {
    fn role_for(&self, token: Option<&str>) -> ApiResult<Role> {
        match token {
            Some(t) if t == self.persuader_token => Ok(Role::Persuader),
            Some(t) if t == self.target_token => Ok(Role::Target),
            _ => Err(ApiError::new(StatusCode::UNAUTHORIZED, "bad_token", "missing or unknown role token")),
        }
    }
}

impl Live {
    fn publish(&mut self, tx: &broadcast::Sender<Envelope>, audience: Audience, line: Line) {
        let env = Envelope {
            seq: self.log.len(),
            audience,
            line,
        };
        self.log.push(env.clone());
        let _ = tx.send(env);
    }

    fn publish_events(&mut self, tx: &broadcast::Sender<Envelope>, events: Vec<MessageEvent>) {
        for e in events {
            self.publish(tx, Audience::Both, Line::Message(e));
        }
        self.publish_end_if_done(tx);
    }

    fn publish_end_if_done(&mut self, tx: &broadcast::Sender<Envelope>) {
        let already = self.log.iter().any(|e| matches!(e.line, Line::Outcome { .. }));
        if already || !self.session.is_ended() {
            return;
        }
        let t = self.session.transcript().expect("ended sessions have transcripts");
        self.publish(
            tx,
            Audience::Both,
            Line::Choice {
                stage: ChoiceStage::Final,
                proposal: t.final_choice,
            },
        );
        self.publish(
            tx,
            Audience::Both,
            Line::Outcome {
                success: t.success,
                incomplete: t.incomplete,
            },
        );
    }

    /// Let an automated persuader speak once, if it is its turn.
    fn agent_turn(&mut self, tx: &broadcast::Sender<Envelope>) {
        let Some(agent) = self.agent.as_mut() else { return };
        if self.session.may_post(Role::Persuader).is_err() {
            return;
        }
        match agent.next_message(&self.session.agent_view()) {
            Ok(Some(text)) => match self.session.post(Role::Persuader, &text) {
                Ok(events) => self.publish_events(tx, events),
                Err(e) => {
                    self.session.abort(e.to_string());
                    self.publish_end_if_done(tx);
                }
            },
            // A finished agent leaves the final choice to the human target.
            Ok(None) => self.agent = None,
            Err(e) => {
                self.session.abort(e.to_string());
                self.publish_end_if_done(tx);
            }
        }
    }
}

pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Entry>>>,
    pool: Vec<GameInstance>,
    seen: Mutex<HashMap<String, Vec<PayoffMatrix>>>,
    llm: Option<Arc<dyn ChatClient>>,
    next_seed: AtomicU64,
}

impl AppState {
    /// `pool_size` instances per registered scenario, generated from `seed`.
    pub fn new(seed: u64, pool_size: usize, llm: Option<Arc<dyn ChatClient>>) -> anyhow::Result<Self> {
        let mut pool = Vec::new();
        for s in scenario::all() {
            pool.extend(generate(seed, &s, pool_size, &GenerateOptions::default())?);
        }
        Ok(AppState {
            sessions: Mutex::new(HashMap::new()),
            pool,
            seen: Mutex::new(HashMap::new()),
            llm,
            next_seed: AtomicU64::new(seed),
        })
    }

    fn entry(&self, id: &str) -> ApiResult<Arc<Entry>> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}")))
    }

    fn pick_instance(&self, req: &CreateSession) -> ApiResult<GameInstance> {
        if let Some(inst) = &req.instance {
            return Ok(inst.clone());
        }
        let candidates: Vec<GameInstance> = self
            .pool
            .iter()
            .filter(|i| req.scenario.as_ref().is_none_or(|s| &i.scenario_id == s))
            .cloned()
            .collect();
        if candidates.is_empty() {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_config",
                format!("no games for scenario {:?}", req.scenario),
            ));
        }
        let mut seen = self.seen.lock().unwrap();
        let history = req.participant.as_ref().map(|p| seen.entry(p.clone()).or_default());
        let seen_now: &[PayoffMatrix] = history.as_deref().map(Vec::as_slice).unwrap_or(&[]);
        let picked = match &req.target_valence {
            Some(v) => select_game(&candidates, seen_now, v).cloned(),
            None => candidates
                .iter()
                .find(|i| !seen_now.contains(&i.matrix))
                .cloned()
                .ok_or(mindgames_core::analytics::AnalyticsError::PoolExhausted),
        }
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, "pool_exhausted", e.to_string()))?;
        if let Some(h) = history {
            h.push(picked.matrix);
        }
        Ok(picked)
    }
}

fn token() -> String {
    format!("{:032x}", rand::random::<u128>())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub condition: Condition,
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default = "default_persuader")]
    pub persuader: PersuaderKind,
    #[serde(default = "default_target")]
    pub target: TargetKind,
    #[serde(default = "default_classifier")]
    pub classifier: ClassifierKind,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub participant: Option<String>,
    #[serde(default)]
    pub target_participant: Option<String>,
    /// Values to match when selecting a game from the pool.
    #[serde(default)]
    pub target_valence: Option<ValenceVector>,
    /// Survey-inferred values for the real-persuasion mode.
    #[serde(default)]
    pub inferred_valence: Option<ValenceVector>,
    #[serde(default)]
    pub instance: Option<GameInstance>,
    #[serde(default)]
    pub max_persuader_turns: Option<usize>,
    #[serde(default)]
    pub random_draws: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_persuader() -> PersuaderKind {
    PersuaderKind::Human
}

fn default_target() -> TargetKind {
    TargetKind::Bot
}

fn default_classifier() -> ClassifierKind {
    ClassifierKind::Rules
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    pub persuader_token: String,
    pub target_token: String,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<SessionHandle>)> {
    let req: CreateSession = parse_body(&body)?;
    let handle = blocking(move || create_blocking(&state, req)).await?;
    Ok((StatusCode::CREATED, Json(handle)))
}

fn create_blocking(state: &AppState, req: CreateSession) -> ApiResult<SessionHandle> {
    let bad = |reason: &str| ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", reason);
    if req.target == TargetKind::Bot && req.persuader != PersuaderKind::Human {
        return Err(bad("automated persuaders play the bot through `simulate`"));
    }
    let needs_llm = req.persuader == PersuaderKind::Llm || req.classifier == ClassifierKind::Llm;
    if needs_llm && state.llm.is_none() {
        return Err(bad("no llm endpoint configured"));
    }
    let instance = state.pick_instance(&req)?;
    let seed = req.seed.unwrap_or_else(|| state.next_seed.fetch_add(1, Ordering::Relaxed));
    let mode = req.mode.unwrap_or(match (req.target, req.inferred_valence.is_some()) {
        (TargetKind::Bot, _) => Mode::RationalBot,
        (TargetKind::Human, false) => Mode::RolePlay,
        (TargetKind::Human, true) => Mode::RealPersuasion,
    });
    let config = SessionConfig {
        instance,
        condition: req.condition,
        persuader_kind: req.persuader,
        target_kind: req.target,
        classifier_kind: req.classifier,
        max_persuader_turns: req.max_persuader_turns.unwrap_or(DEFAULT_MAX_PERSUADER_TURNS),
        seed,
        mode,
        participant: req.participant,
        target_participant: req.target_participant,
        inferred_valence: req.inferred_valence,
        random_draws: req.random_draws,
    };
    let classifier = build_classifier(req.classifier, state.llm.clone()).map_err(|e| bad(&e.to_string()))?;
    let session = Session::new(config, classifier)?;
    let agent: Option<Box<dyn Persuader>> = match req.persuader {
        PersuaderKind::Human => None,
        PersuaderKind::Optimal => Some(Box::new(OptimalPersuader::new())),
        PersuaderKind::Random => Some(Box::new(RandomPersuader::new(seed, req.random_draws.unwrap_or(6)))),
        PersuaderKind::Llm => Some(Box::new(LlmPersuader::new(
            state.llm.clone().expect("checked above"),
            DEFAULT_MESSAGE_CHARS,
        ))),
    };
    let (tx, _) = broadcast::channel(1024);
    let entry = Arc::new(Entry {
        live: Mutex::new(Live {
            session,
            agent,
            log: Vec::new(),
        }),
        persuader_token: token(),
        target_token: token(),
        tx,
    });
    let handle = SessionHandle {
        session_id: token(),
        persuader_token: entry.persuader_token.clone(),
        target_token: entry.target_token.clone(),
    };
    state.sessions.lock().unwrap().insert(handle.session_id.clone(), entry);
    Ok(handle)
}

fn header_token(headers: &HeaderMap) -> Option<&str> {
    headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok())
}

async fn get_view(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let entry = state.entry(&id)?;
    let role = entry.role_for(header_token(&headers))?;
    let live = entry.live.lock().unwrap();
    Ok(Json(live.session.view(role)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostMessage {
    text: String,
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Vec<MessageEvent>>> {
    let entry = state.entry(&id)?;
    let role = entry.role_for(header_token(&headers))?;
    let msg: PostMessage = parse_body(&body)?;
    let events = blocking(move || {
        let mut live = entry.live.lock().unwrap();
        let events = live.session.post(role, &msg.text)?;
        live.publish_events(&entry.tx, events.clone());
        if role == Role::Target {
            live.agent_turn(&entry.tx);
        }
        Ok(events)
    })
    .await?;
    Ok(Json(events))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostChoice {
    stage: ChoiceStage,
    #[serde(default)]
    proposal: Option<Proposal>,
}

/// The target records its choices. In a bot game the persuader ends the game
/// with `stage = final` and no proposal; the bot then makes its choice.
async fn post_choice(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let entry = state.entry(&id)?;
    let role = entry.role_for(header_token(&headers))?;
    let choice: PostChoice = parse_body(&body)?;
    blocking(move || {
        let mut live = entry.live.lock().unwrap();
        let is_bot = live.session.config().target_kind == TargetKind::Bot;
        match (role, choice.stage, choice.proposal) {
            (Role::Persuader, ChoiceStage::Final, None) if is_bot => {
                live.session.finish()?;
            }
            (Role::Persuader, _, _) => {
                return Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "only the target chooses"));
            }
            (Role::Target, _, None) => {
                return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", "proposal is required"));
            }
            (Role::Target, ChoiceStage::Pre, Some(p)) => {
                live.session.pre_choice(p)?;
                live.publish(
                    &entry.tx,
                    Audience::Target,
                    Line::Choice {
                        stage: ChoiceStage::Pre,
                        proposal: p,
                    },
                );
                live.agent_turn(&entry.tx);
            }
            (Role::Target, ChoiceStage::Final, Some(p)) => {
                live.session.final_choice(p)?;
            }
        }
        live.publish_end_if_done(&entry.tx);
        let t = live.session.transcript().ok();
        Ok(Json(json!({
            "ended": live.session.is_ended(),
            "final_choice": t.as_ref().map(|t| t.final_choice),
            "success": t.as_ref().map(|t| t.success),
        })))
    })
    .await
}

async fn get_transcript(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let entry = state.entry(&id)?;
    entry.role_for(header_token(&headers))?;
    let live = entry.live.lock().unwrap();
    Ok(Json(live.session.transcript()?).into_response())
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    token: Option<String>,
}

async fn stream(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    headers: HeaderMap,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let entry = state.entry(&id)?;
    let role = entry.role_for(q.token.as_deref().or(header_token(&headers)))?;
    Ok(ws.on_upgrade(move |socket| forward(socket, entry, role)))
}

/// Replay the log, then forward live events, in sequence order.
async fn forward(mut socket: WebSocket, entry: Arc<Entry>, role: Role) {
    let (backlog, mut rx) = {
        let live = entry.live.lock().unwrap();
        (live.log.clone(), entry.tx.subscribe())
    };
    let mut next = 0;
    for env in backlog {
        next = env.seq + 1;
        if env.visible_to(role) && socket.send(Message::Text(env.to_json().into())).await.is_err() {
            return;
        }
        if matches!(env.line, Line::Outcome { .. }) {
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
    }
    loop {
        tokio::select! {
            recv = rx.recv() => match recv {
                Ok(env) => {
                    if env.seq < next {
                        continue;
                    }
                    next = env.seq + 1;
                    if env.visible_to(role) && socket.send(Message::Text(env.to_json().into())).await.is_err() {
                        return;
                    }
                    if matches!(env.line, Line::Outcome { .. }) {
                        let _ = socket.send(Message::Close(None)).await;
                        return;
                    }
                }
                Err(_) => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/view", get(get_view))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/choice", post(post_choice))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
