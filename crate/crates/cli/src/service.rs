//! HTTP API over a workspace directory.
//!
//! Every handler loads what it needs from the store, performs one core
//! operation and writes the outcome back. Session mutations are serialized
//! per session id; the log file stays the source of truth.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use facetmag_core::facet::{is_canonical_id, is_dimension_id};
use facetmag_core::rules::dsl::parse_rules_with_id;
use facetmag_core::session::SessionStatus;
use facetmag_core::store::{self, DIMENSION_EXT, RESULT_EXT, RULES_EXT, SESSION_EXT, USE_CASE_EXT};
use facetmag_core::{
    evaluate, join_all, merge_all, session_result, verify_composition, Dimension, EvalResult, FacetId,
    Judgment, RuleSet, Session, UseCase,
};

use crate::error::{AppError, Kind};

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: &'static str,
    message: String,
}

/// Response wrapper: exactly one of `payload` and `error` is present.
#[derive(Debug, Serialize)]
struct Envelope {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    payload: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorBody>,
    #[serde(skip_serializing_if = "Option::is_none")]
    version: Option<u64>,
}

fn ok<T: Serialize>(status: StatusCode, payload: &T, version: Option<u64>) -> Response {
    let env = Envelope {
        status: "ok",
        payload: Some(serde_json::to_value(payload).expect("payloads serialize")),
        error: None,
        version,
    };
    (status, Json(env)).into_response()
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = match self.kind {
            Kind::Invalid => StatusCode::BAD_REQUEST,
            Kind::NotFound => StatusCode::NOT_FOUND,
            Kind::Conflict => StatusCode::CONFLICT,
            Kind::Domain => StatusCode::UNPROCESSABLE_ENTITY,
            Kind::Io => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let env = Envelope {
            status: "error",
            payload: None,
            error: Some(ErrorBody {
                code: self.code,
                message: self.message,
            }),
            version: self.version,
        };
        (status, Json(env)).into_response()
    }
}

type ApiResult = Result<Response, AppError>;

pub struct AppState {
    root: PathBuf,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    writes: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            sessions: Mutex::new(HashMap::new()),
            writes: tokio::sync::Mutex::new(()),
        }
    }

    fn session_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.sessions
            .lock()
            .expect("session lock table")
            .entry(id.to_owned())
            .or_default()
            .clone()
    }

    fn path(&self, id: &str, ext: &str) -> PathBuf {
        self.root.join(format!("{id}{ext}"))
    }
}

type Shared = Arc<AppState>;

pub fn router(state: AppState, app_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/dimensions", get(list_dimensions).post(put_dimension))
        .route("/dimensions/join", post(join_dimensions))
        .route("/usecases", get(list_use_cases).post(put_use_case))
        .route("/rulesets", get(list_rule_sets).post(put_rule_set))
        .route("/rulesets/{id}", get(get_rule_set))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/judgments", post(post_judgment))
        .route("/sessions/{id}/close", post(close_session))
        .route("/sessions/{id}/result", get(get_session_result))
        .route("/results/evaluate", post(evaluate_stored))
        .route("/results/merge", post(merge_stored))
        .route("/results/{id}/coverage", get(get_coverage))
        .route("/verify", post(verify))
        .with_state(Arc::new(state));
    match app_dir {
        Some(dir) => api.nest_service("/app", tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

fn parse_body<T: DeserializeOwned>(body: &str) -> Result<T, AppError> {
    Ok(store::from_json_str(Path::new("request body"), body)?)
}

fn check_id(id: &str) -> Result<(), AppError> {
    if is_canonical_id(id) {
        Ok(())
    } else {
        Err(AppError::new(Kind::Invalid, "bad_id", format!("`{id}` is not a valid id")))
    }
}

fn check_dimension_id(id: &str) -> Result<(), AppError> {
    if is_dimension_id(id) {
        Ok(())
    } else {
        Err(AppError::new(Kind::Invalid, "bad_id", format!("`{id}` is not a valid dimension id")))
    }
}

fn load_dimension(st: &AppState, id: &str) -> Result<Dimension, AppError> {
    check_dimension_id(id)?;
    let path = st.path(id, DIMENSION_EXT);
    if !path.exists() {
        return Err(AppError::not_found("dimension", id));
    }
    Ok(store::load_dimension(&path)?)
}

fn load_use_case(st: &AppState, id: &str) -> Result<UseCase, AppError> {
    check_id(id)?;
    let path = st.path(id, USE_CASE_EXT);
    if !path.exists() {
        return Err(AppError::not_found("use case", id));
    }
    Ok(store::load_use_case(&path)?)
}

fn load_rules(st: &AppState, id: &str) -> Result<RuleSet, AppError> {
    check_id(id)?;
    let path = st.path(id, RULES_EXT);
    if !path.exists() {
        return Err(AppError::not_found("rule set", id));
    }
    Ok(store::load_rules(&path)?)
}

fn load_session(st: &AppState, id: &str) -> Result<Session, AppError> {
    check_id(id)?;
    let path = st.path(id, SESSION_EXT);
    if !path.exists() {
        return Err(AppError::not_found("session", id));
    }
    Ok(store::replay_session(&path)?)
}

fn load_result(st: &AppState, id: &str) -> Result<EvalResult, AppError> {
    check_id(id)?;
    let path = st.path(id, RESULT_EXT);
    if !path.exists() {
        return Err(AppError::not_found("result", id));
    }
    Ok(store::load_result(&path)?)
}

/// Stored files with the given extension, sorted by id.
fn stored_ids(st: &AppState, ext: &str) -> Result<Vec<String>, AppError> {
    let mut ids: Vec<String> = fs::read_dir(&st.root)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(ext)).map(str::to_owned))
        .collect();
    ids.sort();
    Ok(ids)
}

async fn list_dimensions(State(st): State<Shared>) -> ApiResult {
    let dims = stored_ids(&st, DIMENSION_EXT)?
        .iter()
        .map(|id| load_dimension(&st, id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ok(StatusCode::OK, &dims, None))
}

async fn put_dimension(State(st): State<Shared>, body: String) -> ApiResult {
    let d: Dimension = parse_body(&body)?;
    let _guard = st.writes.lock().await;
    for other in stored_ids(&st, DIMENSION_EXT)? {
        if other != d.id() {
            d.check_compatible(&load_dimension(&st, &other)?)?;
        }
    }
    store::save_dimension(&d, &st.path(d.id(), DIMENSION_EXT))?;
    Ok(ok(StatusCode::CREATED, &d, None))
}

#[derive(Deserialize)]
struct JoinRequest {
    dimensions: Vec<String>,
    #[serde(default)]
    save: bool,
}

async fn join_dimensions(State(st): State<Shared>, body: String) -> ApiResult {
    let req: JoinRequest = parse_body(&body)?;
    let dims = req
        .dimensions
        .iter()
        .map(|id| load_dimension(&st, id))
        .collect::<Result<Vec<_>, _>>()?;
    let joined = join_all(&dims)?;
    if req.save {
        let _guard = st.writes.lock().await;
        store::save_dimension(&joined, &st.path(joined.id(), DIMENSION_EXT))?;
    }
    Ok(ok(StatusCode::OK, &joined, None))
}

async fn list_use_cases(State(st): State<Shared>) -> ApiResult {
    let ucs = stored_ids(&st, USE_CASE_EXT)?
        .iter()
        .map(|id| load_use_case(&st, id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ok(StatusCode::OK, &ucs, None))
}

async fn put_use_case(State(st): State<Shared>, body: String) -> ApiResult {
    let u: UseCase = parse_body(&body)?;
    let _guard = st.writes.lock().await;
    store::save_use_case(&u, &st.path(u.id(), USE_CASE_EXT))?;
    Ok(ok(StatusCode::CREATED, &u, None))
}

#[derive(Serialize)]
struct RuleSetView {
    id: String,
    rules: usize,
    text: String,
}

impl From<&RuleSet> for RuleSetView {
    fn from(r: &RuleSet) -> Self {
        Self {
            id: r.id().to_owned(),
            rules: r.len(),
            text: r.to_string(),
        }
    }
}

async fn list_rule_sets(State(st): State<Shared>) -> ApiResult {
    let sets = stored_ids(&st, RULES_EXT)?
        .iter()
        .map(|id| load_rules(&st, id).map(|r| RuleSetView::from(&r)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ok(StatusCode::OK, &sets, None))
}

async fn get_rule_set(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let r = load_rules(&st, &id)?;
    Ok(ok(StatusCode::OK, &RuleSetView::from(&r), None))
}

#[derive(Deserialize)]
struct RuleSetQuery {
    id: String,
}

/// Body is rules-language text; the id comes from `?id=`.
async fn put_rule_set(State(st): State<Shared>, Query(q): Query<RuleSetQuery>, body: String) -> ApiResult {
    check_id(&q.id)?;
    let rules = parse_rules_with_id(&q.id, &body)?;
    let _guard = st.writes.lock().await;
    store::save_rules(&rules, &st.path(&q.id, RULES_EXT))?;
    Ok(ok(StatusCode::CREATED, &RuleSetView::from(&rules), None))
}

#[derive(Serialize)]
struct SessionView<'a> {
    id: &'a str,
    version: u64,
    status: SessionStatus,
    dimensions: Vec<&'a str>,
    use_case: &'a str,
    assignments: &'a BTreeMap<String, BTreeSet<FacetId>>,
    judgments: &'a [Judgment],
    evaluated: usize,
    cells: usize,
}

fn session_view(s: &Session) -> Response {
    let coverage = s.coverage();
    let view = SessionView {
        id: s.id(),
        version: s.version(),
        status: s.status(),
        dimensions: s.dimension_ids(),
        use_case: s.use_case().id(),
        assignments: s.assignments(),
        judgments: s.judgments(),
        evaluated: coverage.evaluated(),
        cells: coverage.len(),
    };
    ok(StatusCode::OK, &view, Some(s.version()))
}

#[derive(Deserialize)]
struct CreateSession {
    id: String,
    dimensions: Vec<String>,
    use_case: String,
    #[serde(default)]
    assignments: BTreeMap<String, BTreeSet<FacetId>>,
}

async fn create_session(State(st): State<Shared>, body: String) -> ApiResult {
    let req: CreateSession = parse_body(&body)?;
    check_id(&req.id)?;
    let dims = req
        .dimensions
        .iter()
        .map(|id| load_dimension(&st, id))
        .collect::<Result<Vec<_>, _>>()?;
    let u = load_use_case(&st, &req.use_case)?;
    let lock = st.session_lock(&req.id);
    let _guard = lock.lock().await;
    let path = st.path(&req.id, SESSION_EXT);
    if path.exists() {
        return Err(AppError::new(
            Kind::Conflict,
            "already_exists",
            format!("session `{}` already exists", req.id),
        ));
    }
    let session = Session::create(&req.id, &dims, &u, req.assignments)?;
    store::append_session_event(&path, &session.events()[0])?;
    let mut resp = session_view(&session);
    *resp.status_mut() = StatusCode::CREATED;
    Ok(resp)
}

async fn get_session(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult {
    Ok(session_view(&load_session(&st, &id)?))
}

#[derive(Deserialize)]
struct JudgmentRequest {
    expected_version: u64,
    #[serde(flatten)]
    judgment: Judgment,
}

async fn post_judgment(State(st): State<Shared>, UrlPath(id): UrlPath<String>, body: String) -> ApiResult {
    let req: JudgmentRequest = parse_body(&body)?;
    let lock = st.session_lock(&id);
    let _guard = lock.lock().await;
    let mut session = load_session(&st, &id)?;
    let version = session.record_judgment(req.judgment, req.expected_version)?;
    let event = session.events().last().expect("event just recorded");
    store::append_session_event(&st.path(&id, SESSION_EXT), event)?;
    Ok(ok(StatusCode::OK, &json!({ "id": id, "version": version }), Some(version)))
}

#[derive(Deserialize)]
struct CloseRequest {
    expected_version: u64,
    author: String,
    timestamp: String,
}

async fn close_session(State(st): State<Shared>, UrlPath(id): UrlPath<String>, body: String) -> ApiResult {
    let req: CloseRequest = parse_body(&body)?;
    let lock = st.session_lock(&id);
    let _guard = lock.lock().await;
    let mut session = load_session(&st, &id)?;
    let version = session.close(req.expected_version, &req.author, &req.timestamp)?;
    let event = session.events().last().expect("event just recorded");
    store::append_session_event(&st.path(&id, SESSION_EXT), event)?;
    Ok(ok(StatusCode::OK, &json!({ "id": id, "version": version }), Some(version)))
}

async fn get_session_result(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let s = load_session(&st, &id)?;
    Ok(ok(StatusCode::OK, &session_result(&s), Some(s.version())))
}

#[derive(Deserialize)]
struct EvaluateRequest {
    dimension: String,
    use_case: String,
    rules: String,
    #[serde(default)]
    save_as: Option<String>,
}

async fn evaluate_stored(State(st): State<Shared>, body: String) -> ApiResult {
    let req: EvaluateRequest = parse_body(&body)?;
    let d = load_dimension(&st, &req.dimension)?;
    let u = load_use_case(&st, &req.use_case)?;
    let rules = load_rules(&st, &req.rules)?;
    let result = evaluate(&d, &u, &rules)?;
    save_result_as(&st, req.save_as.as_deref(), &result).await?;
    Ok(ok(StatusCode::OK, &result, None))
}

async fn save_result_as(st: &AppState, id: Option<&str>, result: &EvalResult) -> Result<(), AppError> {
    if let Some(id) = id {
        check_id(id)?;
        let _guard = st.writes.lock().await;
        store::save_result(result, &st.path(id, RESULT_EXT))?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct MergeRequest {
    #[serde(default)]
    results: Vec<String>,
    #[serde(default)]
    sessions: Vec<String>,
    #[serde(default)]
    save_as: Option<String>,
}

async fn merge_stored(State(st): State<Shared>, body: String) -> ApiResult {
    let req: MergeRequest = parse_body(&body)?;
    let mut results = req
        .results
        .iter()
        .map(|id| load_result(&st, id))
        .collect::<Result<Vec<_>, _>>()?;
    for id in &req.sessions {
        results.push(session_result(&load_session(&st, id)?));
    }
    let merged = merge_all(&results)?
        .ok_or_else(|| AppError::new(Kind::Domain, "nothing_to_merge", "no results or sessions given"))?;
    save_result_as(&st, req.save_as.as_deref(), &merged).await?;
    Ok(ok(StatusCode::OK, &merged, None))
}

async fn get_coverage(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let r = load_result(&st, &id)?;
    let payload = json!({
        "id": id,
        "cells": r.coverage.len(),
        "evaluated": r.coverage.evaluated(),
        "density": r.coverage.density(),
        "matrix": r.coverage,
    });
    Ok(ok(StatusCode::OK, &payload, None))
}

#[derive(Deserialize)]
struct VerifyRequest {
    dimensions: [String; 2],
    use_case: String,
    rules: String,
}

async fn verify(State(st): State<Shared>, body: String) -> ApiResult {
    let req: VerifyRequest = parse_body(&body)?;
    let d1 = load_dimension(&st, &req.dimensions[0])?;
    let d2 = load_dimension(&st, &req.dimensions[1])?;
    let u = load_use_case(&st, &req.use_case)?;
    let rules = load_rules(&st, &req.rules)?;
    let report = verify_composition(&d1, &d2, &u, &rules)?;
    let payload = json!({
        "equal": report.equal,
        "diff": report.diff(),
        "only_joined": report.only_joined,
        "only_merged": report.only_merged,
        "joined_invocations": report.joined_invocations,
        "separate_invocations": report.separate_invocations,
    });
    Ok(ok(StatusCode::OK, &payload, None))
}
