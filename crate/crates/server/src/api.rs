//! HTTP routes. Every JSON body carries the `request_id` that is also sent
//! in the `x-request-id` header.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Extension, Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use scriptorium::agent::{
    catalog, dispatch, tool_spec, Agent, ArtifactKind, ImageInput, ImageOutputs, NoArtifacts, ToolContext, TurnInput,
};
use scriptorium::kb::FragmentId;
use scriptorium::raster::RasterImage;
use scriptorium::text::retrieve_texts;
use scriptorium::wire::ToolRequest;

use crate::error::ApiError;
use crate::sessions::{Lookup, Session, SessionStore};

pub const REQUEST_ID_HEADER: &str = "x-request-id";
pub const DEFAULT_SEARCH_K: usize = 10;
pub const MAX_SEARCH_K: usize = 100;

#[derive(Clone)]
pub struct AppState {
    pub agent: Arc<Agent>,
    pub sessions: Arc<SessionStore>,
}

impl AppState {
    pub fn new(agent: Agent, ttl: Duration, trace_cap: usize) -> Self {
        Self {
            agent: Arc::new(agent),
            sessions: Arc::new(SessionStore::new(ttl, trace_cap)),
        }
    }
}

/// Id of the current request, echoed from the client when it sent one.
#[derive(Debug, Clone)]
pub struct RequestId(pub String);

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/turns", post(run_turn))
        .route("/sessions/{id}/trace", get(session_trace))
        .route("/sessions/{id}/artifacts/{handle}", get(artifact))
        .route("/kb/fragments/{id}", get(fragment))
        .route("/kb/search", get(search))
        .route("/kb/images/{*key}", get(kb_image))
        .route("/tools", get(list_tools))
        .route("/tools/{name}", post(call_tool))
        .fallback(not_routed)
        .layer(middleware::from_fn(request_id))
        .with_state(state)
}

fn valid_request_id(v: &str) -> bool {
    !v.is_empty() && v.len() <= 128 && v.bytes().all(|b| b.is_ascii_alphanumeric() || b"-_.".contains(&b))
}

async fn request_id(mut req: Request, next: Next) -> Response {
    let id = req
        .headers()
        .get(REQUEST_ID_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|v| valid_request_id(v))
        .map(str::to_string)
        .unwrap_or_else(|| hex::encode(rand::random::<u64>().to_be_bytes()));
    req.extensions_mut().insert(RequestId(id.clone()));
    let mut res = next.run(req).await;
    if let Ok(v) = HeaderValue::from_str(&id) {
        res.headers_mut().insert(REQUEST_ID_HEADER, v);
    }
    res
}

/// Adds `request_id` to a JSON object.
fn with_id(mut body: Value, rid: &RequestId) -> Json<Value> {
    if let Value::Object(m) = &mut body {
        m.insert("request_id".into(), Value::String(rid.0.clone()));
    }
    Json(body)
}

/// JSON body extractor reporting the failing field path.
pub struct ValidJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ValidJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let rid = req.extensions().get::<RequestId>().map(|r| r.0.clone()).unwrap_or_default();
        let json_type = req
            .headers()
            .get(header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.starts_with("application/json"));
        if !json_type {
            return Err(ApiError::new(
                StatusCode::UNSUPPORTED_MEDIA_TYPE,
                "unsupported_media_type",
                "expected Content-Type: application/json",
            )
            .with_request_id(&rid));
        }
        let bytes = axum::body::Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "validation_error", e.body_text()).with_request_id(&rid))?;
        let de = &mut serde_json::Deserializer::from_slice(&bytes);
        serde_path_to_error::deserialize(de).map(ValidJson).map_err(|e| {
            let path = e.path().to_string();
            let message = e.into_inner().to_string();
            let field = match path.as_str() {
                // Missing fields fail at the enclosing object.
                "." => missing_field(&message).unwrap_or("body").to_string(),
                _ => path,
            };
            ApiError::validation(field, message).with_request_id(&rid)
        })
    }
}

fn missing_field(message: &str) -> Option<&str> {
    message.strip_prefix("missing field `")?.split('`').next()
}

async fn not_routed(Extension(rid): Extension<RequestId>) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "route_not_found", "no such route").with_request_id(&rid.0)
}

async fn health(Extension(rid): Extension<RequestId>) -> Json<Value> {
    with_id(json!({ "status": "ok" }), &rid)
}

fn live_session(state: &AppState, id: &str, rid: &RequestId) -> Result<Arc<Session>, ApiError> {
    match state.sessions.get(id) {
        Lookup::Live(s) => Ok(s),
        Lookup::Expired => Err(ApiError::new(StatusCode::GONE, "session_expired", format!("session expired: {id}"))
            .with_request_id(&rid.0)),
        Lookup::Unknown => Err(ApiError::not_found("session", id).with_request_id(&rid.0)),
    }
}

async fn create_session(State(state): State<AppState>, Extension(rid): Extension<RequestId>) -> impl IntoResponse {
    let s = state.sessions.create();
    (
        StatusCode::CREATED,
        with_id(json!({ "session_id": s.id, "created_at": s.created_at }), &rid),
    )
}

/// Body of `POST /sessions/{id}/turns`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnBody {
    #[serde(default)]
    pub query: String,
    /// Base64-encoded PNGs.
    #[serde(default)]
    pub images: Vec<String>,
    /// Handles of earlier artifacts.
    #[serde(default)]
    pub refs: Vec<String>,
}

async fn run_turn(
    State(state): State<AppState>,
    Extension(rid): Extension<RequestId>,
    Path(id): Path<String>,
    ValidJson(body): ValidJson<TurnBody>,
) -> Result<Json<Value>, ApiError> {
    let session = live_session(&state, &id, &rid)?;
    if body.query.trim().is_empty() && body.images.is_empty() {
        return Err(ApiError::validation("query", "a turn needs a query or an image").with_request_id(&rid.0));
    }
    let mut input = TurnInput::text(body.query);
    for (i, b64) in body.images.iter().enumerate() {
        let image = RasterImage::from_base64_png(b64)
            .map_err(|e| ApiError { field: Some(format!("images[{i}]")), ..ApiError::from(e) }.with_request_id(&rid.0))?;
        input.images.push(ImageInput::Raster(image));
    }
    input.refs = body.refs;

    // Turns of one session queue on this lock.
    let mut data = session.data.clone().lock_owned().await;
    let agent = state.agent.clone();
    let cap = state.sessions.trace_cap();
    let outcome = tokio::task::spawn_blocking(move || {
        let outcome = agent.run_turn(&mut data.state, input);
        if let Ok(o) = &outcome {
            data.record(&o.trace, cap);
        }
        outcome
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()).with_request_id(&rid.0))?
    .map_err(|e| ApiError::from(e).with_request_id(&rid.0))?;
    let body = serde_json::to_value(&outcome).map_err(|e| ApiError::from(scriptorium::error::Error::from(e)))?;
    Ok(with_id(body, &rid))
}

async fn session_trace(
    State(state): State<AppState>,
    Extension(rid): Extension<RequestId>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let session = live_session(&state, &id, &rid)?;
    let data = session.data.lock().await;
    Ok(with_id(
        json!({
            "session_id": id,
            "turns": data.state.turn,
            "dropped": data.dropped,
            "events": data.trace,
        }),
        &rid,
    ))
}

async fn artifact(
    State(state): State<AppState>,
    Extension(rid): Extension<RequestId>,
    Path((id, handle)): Path<(String, String)>,
) -> Result<Json<Value>, ApiError> {
    let session = live_session(&state, &id, &rid)?;
    let data = session.data.lock().await;
    let a = data
        .state
        .artifacts
        .get(&handle)
        .ok_or_else(|| ApiError::not_found("artifact", &handle).with_request_id(&rid.0))?;
    let mut body = serde_json::to_value(a.summary()).unwrap_or_default();
    match &a.kind {
        ArtifactKind::Image { image, .. } => body["png_base64"] = Value::String(image.to_base64_png()),
        ArtifactKind::Result { data } => body["data"] = data.clone(),
    }
    Ok(with_id(body, &rid))
}

async fn fragment(
    State(state): State<AppState>,
    Extension(rid): Extension<RequestId>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let fid = FragmentId::new(id.as_str()).map_err(|e| ApiError::validation("id", e.to_string()).with_request_id(&rid.0))?;
    let bundle = state
        .agent
        .kb()
        .lookup_fragment(&fid)
        .map_err(|e| ApiError::from(e).with_request_id(&rid.0))?;
    Ok(with_id(serde_json::to_value(bundle).unwrap_or_default(), &rid))
}

async fn search(
    State(state): State<AppState>,
    Extension(rid): Extension<RequestId>,
    Query(params): Query<BTreeMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let bad = |field: &str, msg: String| ApiError::validation(field, msg).with_request_id(&rid.0);
    if let Some(other) = params.keys().find(|k| !["q", "k"].contains(&k.as_str())) {
        return Err(bad(other, format!("unknown parameter {other:?}")));
    }
    let q = params.get("q").map(|q| q.trim()).unwrap_or_default();
    if q.is_empty() {
        return Err(bad("q", "query is empty".into()));
    }
    let k = match params.get("k") {
        None => DEFAULT_SEARCH_K,
        Some(k) => k.parse::<usize>().map_err(|e| bad("k", format!("{k:?}: {e}")))?,
    };
    if !(1..=MAX_SEARCH_K).contains(&k) {
        return Err(bad("k", format!("k must be in 1..={MAX_SEARCH_K}")));
    }
    let hits = retrieve_texts(state.agent.kb().text_index(), q, k).map_err(|e| ApiError::from(e).with_request_id(&rid.0))?;
    Ok(with_id(json!({ "query": q, "k": k, "hits": hits }), &rid))
}

async fn kb_image(
    State(state): State<AppState>,
    Extension(rid): Extension<RequestId>,
    Path(key): Path<String>,
) -> Result<Response, ApiError> {
    let image = state
        .agent
        .kb()
        .image(&key)
        .ok_or_else(|| ApiError::not_found("image", &key).with_request_id(&rid.0))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], image.to_png()).into_response())
}

async fn list_tools(Extension(rid): Extension<RequestId>) -> Json<Value> {
    with_id(json!({ "tools": catalog() }), &rid)
}

/// Runs one tool statelessly. The body and the reply use the tool-call wire
/// format; produced images come back inline.
async fn call_tool(
    State(state): State<AppState>,
    Extension(rid): Extension<RequestId>,
    Path(name): Path<String>,
    ValidJson(request): ValidJson<ToolRequest>,
) -> Result<Json<Value>, ApiError> {
    if tool_spec(&name).is_none() {
        return Err(ApiError::not_found("tool", &name).with_request_id(&rid.0));
    }
    if request.tool != name {
        return Err(ApiError::validation("tool", format!("body names {:?} but the path names {name:?}", request.tool))
            .with_request_id(&rid.0));
    }
    let agent = state.agent.clone();
    let response = tokio::task::spawn_blocking(move || {
        let ctx = ToolContext {
            kb: agent.kb(),
            vision: agent.vision(),
            artifacts: &NoArtifacts,
        };
        dispatch(&ctx, &request, &mut ImageOutputs::inline())
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()).with_request_id(&rid.0))?;
    let mut body = serde_json::to_value(response).unwrap_or_default();
    if let Value::Object(m) = &mut body {
        m.insert("request_id".into(), Value::String(rid.0.clone()));
    } else {
        body = Value::Object(Map::new());
    }
    Ok(Json(body))
}
