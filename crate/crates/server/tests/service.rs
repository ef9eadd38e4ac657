use std::sync::OnceLock;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use scriptorium::agent::Agent;
use scriptorium::raster::RasterImage;
use scriptorium::synth::{generate_corpus, SynthConfig, SynthCorpus};
use scriptorium_server::{router, AppState, REQUEST_ID_HEADER};

fn corpus() -> &'static SynthCorpus {
    static C: OnceLock<SynthCorpus> = OnceLock::new();
    C.get_or_init(|| generate_corpus(&SynthConfig::default()).unwrap())
}

fn app_with(ttl: Duration, cap: usize) -> Router {
    let kb = corpus().build_snapshot().unwrap();
    router(AppState::new(Agent::new(kb), ttl, cap))
}

fn app() -> Router {
    app_with(Duration::from_secs(600), 1000)
}

fn rubbing_b64(i: usize) -> String {
    let c = corpus();
    c.images[&c.ground_truth.fragments[i].rubbing_ref].to_base64_png()
}

struct Reply {
    status: StatusCode,
    request_id: Option<String>,
    content_type: Option<String>,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let header = |name: &str| res.headers().get(name).map(|v| v.to_str().unwrap().to_string());
    let (request_id, content_type) = (header(REQUEST_ID_HEADER), header("content-type"));
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        request_id,
        content_type,
        bytes,
    }
}

fn assert_error(r: &Reply, status: StatusCode, code: &str, field: Option<&str>) {
    assert_eq!(r.status, status, "{}", String::from_utf8_lossy(&r.bytes));
    let v = r.json();
    assert_eq!(v["error"]["code"], json!(code), "{v}");
    assert!(v["error"]["message"].is_string());
    assert_eq!(v["error"].get("field").and_then(Value::as_str), field);
    assert_eq!(v["request_id"].as_str(), r.request_id.as_deref());
}

async fn new_session(app: &Router) -> String {
    let r = send(app, "POST", "/sessions", None).await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health_echoes_request_ids() {
    let app = app();
    let r = send(&app, "GET", "/health", None).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["request_id"].as_str(), r.request_id.as_deref());

    let req = Request::get("/health").header(REQUEST_ID_HEADER, "abc-123").body(Body::empty()).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    assert_eq!(res.headers()[REQUEST_ID_HEADER], "abc-123");
}

#[tokio::test]
async fn session_creation_schema() {
    let app = app();
    let r = send(&app, "POST", "/sessions", None).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let v = r.json();
    let id = v["session_id"].as_str().unwrap();
    assert_eq!(id.len(), 32);
    assert!(id.bytes().all(|b| b.is_ascii_hexdigit()));
    assert!(v["created_at"].as_u64().unwrap() > 0);
    assert_ne!(id, new_session(&app).await);
}

#[tokio::test]
async fn two_turn_dialogue_over_http() {
    let app = app();
    let id = new_session(&app).await;
    let first = send(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({ "query": "Please analyze this rubbing.", "images": [rubbing_b64(0)] })),
    )
    .await;
    assert_eq!(first.status, StatusCode::OK, "{}", String::from_utf8_lossy(&first.bytes));
    let v = first.json();
    assert_eq!(v["turn"], 1);
    assert_eq!(v["session_id"], json!(id));
    assert_eq!(v["goal"]["intent"], "analyze-rubbing");
    assert!(v["response"].as_str().unwrap().len() > 20);
    let tools: Vec<Vec<&str>> = v["plan"]["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g.as_array().unwrap().iter().map(|c| c["tool"].as_str().unwrap()).collect())
        .collect();
    assert_eq!(
        tools,
        vec![
            vec!["classify_modality"],
            vec!["detect_characters"],
            vec!["retrieve_rubbings"],
            vec!["retrieve_texts", "interpret_fragment"]
        ]
    );
    for e in v["trace"].as_array().unwrap() {
        for key in ["turn", "group", "call_id", "tool", "args", "status", "data", "started_ms", "elapsed_ms"] {
            assert!(e.get(key).is_some(), "trace event lacks {key}: {e}");
        }
        assert_eq!(e["status"], "ok");
    }

    let second = send(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({ "query": "Which catalogues record this character?" })),
    )
    .await;
    let w = second.json();
    assert_eq!(w["turn"], 2);
    assert_eq!(w["referenced"], json!(["t1-c2-0"]));
    assert_eq!(w["trace"][0]["args"]["image"], "t1-c2-0");

    let trace = send(&app, "GET", &format!("/sessions/{id}/trace"), None).await.json();
    assert_eq!(trace["turns"], 2);
    assert_eq!(trace["dropped"], 0);
    let events = trace["events"].as_array().unwrap();
    assert_eq!(events.len(), v["trace"].as_array().unwrap().len() + w["trace"].as_array().unwrap().len());
    assert!(events.windows(2).all(|p| p[0]["turn"].as_u64() <= p[1]["turn"].as_u64()));

    let crop = send(&app, "GET", &format!("/sessions/{id}/artifacts/t1-c2-0"), None).await;
    assert_eq!(crop.status, StatusCode::OK);
    let a = crop.json();
    assert_eq!(a["handle"], "t1-c2-0");
    assert_eq!(a["kind"], "image");
    assert!(RasterImage::from_base64_png(a["png_base64"].as_str().unwrap()).is_ok());

    let missing = send(&app, "GET", &format!("/sessions/{id}/artifacts/t9-c1-0"), None).await;
    assert_error(&missing, StatusCode::NOT_FOUND, "artifact_not_found", None);
}

#[tokio::test]
async fn concurrent_turns_on_one_session_are_serialized() {
    let app = app();
    let id = new_session(&app).await;
    let uri = format!("/sessions/{id}/turns");
    let body = json!({ "query": "Please analyze this rubbing.", "images": [rubbing_b64(1)] });
    let (a, b) = tokio::join!(send(&app, "POST", &uri, Some(body.clone())), send(&app, "POST", &uri, Some(body)));
    let mut turns = vec![a.json()["turn"].as_u64().unwrap(), b.json()["turn"].as_u64().unwrap()];
    turns.sort();
    assert_eq!(turns, vec![1, 2]);
}

#[tokio::test]
async fn trace_is_capped() {
    let app = app_with(Duration::from_secs(600), 3);
    let id = new_session(&app).await;
    let r = send(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({ "query": "Please analyze this rubbing.", "images": [rubbing_b64(0)] })),
    )
    .await;
    let total = r.json()["trace"].as_array().unwrap().len() as u64;
    let trace = send(&app, "GET", &format!("/sessions/{id}/trace"), None).await.json();
    assert_eq!(trace["events"].as_array().unwrap().len(), 3);
    assert_eq!(trace["dropped"].as_u64().unwrap(), total - 3);
}

#[tokio::test]
async fn unknown_and_expired_sessions() {
    let app = app();
    let r = send(&app, "GET", "/sessions/0123/trace", None).await;
    assert_error(&r, StatusCode::NOT_FOUND, "session_not_found", None);

    let app = app_with(Duration::ZERO, 10);
    let id = new_session(&app).await;
    tokio::time::sleep(Duration::from_millis(5)).await;
    let r = send(&app, "POST", &format!("/sessions/{id}/turns"), Some(json!({ "query": "hello" }))).await;
    assert_error(&r, StatusCode::GONE, "session_expired", None);
}

#[tokio::test]
async fn turn_validation_names_the_field() {
    let app = app();
    let id = new_session(&app).await;
    let uri = format!("/sessions/{id}/turns");

    let r = send(&app, "POST", &uri, Some(json!({ "query": "" }))).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "validation_error", Some("query"));

    let r = send(&app, "POST", &uri, Some(json!({ "query": "x", "images": [rubbing_b64(0), "not-a-png"] }))).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "image_decode_error", Some("images[1]"));

    let r = send(&app, "POST", &uri, Some(json!({ "query": "x", "images": [3] }))).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "validation_error", Some("images[0]"));

    let r = send(&app, "POST", &uri, Some(json!({ "query": "x", "colour": "red" }))).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "validation_error", Some("colour"));

    // A rejected turn leaves the session where it was.
    let trace = send(&app, "GET", &format!("/sessions/{id}/trace"), None).await.json();
    assert_eq!(trace["turns"], 0);

    let req = Request::post(&uri).header("content-type", "text/plain").body(Body::from("{}")).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::UNSUPPORTED_MEDIA_TYPE);
}

#[tokio::test]
async fn kb_endpoints() {
    let app = app();
    let c = corpus();
    let fid = c.ground_truth.fragments[0].fragment_id.as_str();

    let r = send(&app, "GET", &format!("/kb/fragments/{fid}"), None).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["fragment_id"], json!(fid));
    assert!(v["rubbing"].is_object());
    assert_eq!(v["characters"].as_array().unwrap().len(), c.ground_truth.fragments[0].characters.len());

    let r = send(&app, "GET", "/kb/fragments/SYN-9999", None).await;
    assert_error(&r, StatusCode::NOT_FOUND, "fragment_not_found", None);

    let r = send(&app, "GET", "/kb/search?q=token-C03&k=3", None).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    let hits = v["hits"].as_array().unwrap();
    assert!(!hits.is_empty() && hits.len() <= 3);
    for h in hits {
        for key in ["rank", "chunk_id", "score", "snippet", "source"] {
            assert!(h.get(key).is_some());
        }
    }
    assert_eq!(send(&app, "GET", "/kb/search?q=token", None).await.json()["k"], 10);
    for (uri, field) in [
        ("/kb/search?q=token&k=0", "k"),
        ("/kb/search?q=token&k=101", "k"),
        ("/kb/search?q=token&k=many", "k"),
        ("/kb/search?k=3", "q"),
        ("/kb/search?q=token&sort=asc", "sort"),
    ] {
        let r = send(&app, "GET", uri, None).await;
        assert_error(&r, StatusCode::BAD_REQUEST, "validation_error", Some(field));
    }

    let key = &c.ground_truth.fragments[0].rubbing_ref;
    let r = send(&app, "GET", &format!("/kb/images/{key}"), None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type.as_deref(), Some("image/png"));
    assert_eq!(&RasterImage::from_png(&r.bytes).unwrap(), &c.images[key]);
    let r = send(&app, "GET", "/kb/images/nope.png", None).await;
    assert_error(&r, StatusCode::NOT_FOUND, "image_not_found", None);
}

#[tokio::test]
async fn tool_endpoints() {
    let app = app();
    let r = send(&app, "GET", "/tools", None).await;
    let tools = r.json()["tools"].as_array().unwrap().clone();
    assert!(tools.len() >= 8);
    for t in &tools {
        for key in ["name", "description", "params", "result_fields", "example_args"] {
            assert!(t.get(key).is_some());
        }
    }

    let image = rubbing_b64(0);
    let r = send(
        &app,
        "POST",
        "/tools/detect_characters",
        Some(json!({ "tool": "detect_characters", "args": { "image": { "png_base64": image } }, "call_id": "c7" })),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["call_id"], "c7");
    assert_eq!(v["status"], "ok");
    assert_eq!(v["data"]["count"], json!(corpus().ground_truth.fragments[0].characters.len()));
    // Crops come back inline.
    let crop = &v["data"]["detections"][0]["crop"];
    assert!(crop["png_base64"].is_string(), "{crop}");

    // Tool failures use the wire format, not the error envelope.
    let r = send(
        &app,
        "POST",
        "/tools/lookup_fragment",
        Some(json!({ "tool": "lookup_fragment", "args": { "fragment_id": "SYN-9999" }, "call_id": "c8" })),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["status"], "error");
    assert!(v["error"].as_str().unwrap().starts_with("fragment_not_found"));

    let r = send(&app, "POST", "/tools/summon", Some(json!({ "tool": "summon", "args": {}, "call_id": "c1" }))).await;
    assert_error(&r, StatusCode::NOT_FOUND, "tool_not_found", None);

    let r = send(
        &app,
        "POST",
        "/tools/lookup_fragment",
        Some(json!({ "tool": "detect_characters", "args": {}, "call_id": "c1" })),
    )
    .await;
    assert_error(&r, StatusCode::BAD_REQUEST, "validation_error", Some("tool"));

    let r = send(&app, "POST", "/tools/lookup_fragment", Some(json!({ "tool": "lookup_fragment", "args": {} }))).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "validation_error", Some("call_id"));
}

#[tokio::test]
async fn unknown_routes_use_the_error_envelope() {
    let r = send(&app(), "GET", "/nowhere", None).await;
    assert_error(&r, StatusCode::NOT_FOUND, "route_not_found", None);
}
