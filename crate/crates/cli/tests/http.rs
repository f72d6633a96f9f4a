use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use qualia_cli::service::{router, AppState, ServiceConfig};
use qualia_core::agents::vision;
use qualia_core::stimulus::BiasModel;

fn config(dir: &std::path::Path) -> ServiceConfig {
    ServiceConfig { data_dir: dir.to_path_buf(), ..ServiceConfig::default() }
}

fn app(dir: &std::path::Path) -> (Router, Arc<AppState>) {
    let state = AppState::open(&config(dir)).unwrap();
    (router(state.clone()), state)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, subject: &str) -> String {
    let (status, v) = call_json(app, "POST", "/v1/sessions", Some(json!({ "subject_id": subject }))).await;
    assert_eq!(status, StatusCode::CREATED);
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_rejects_bad_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, _) = call_json(
        &app,
        "POST",
        "/v1/sessions",
        Some(json!({ "subject_id": "s", "overrides": { "prior": [0.5, 0.5, 0.5] } })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) =
        call_json(&app, "POST", "/v1/sessions", Some(json!({ "subject_id": "s", "overrides": { "tau": "x" } }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, v) =
        call_json(&app, "POST", "/v1/sessions", Some(json!({ "subject_id": "s", "overrides": { "n_max": 3 } }))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    assert_eq!(call(&app, "GET", "/v1/sessions/nope/next", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/v1/items/nope/image.png", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/v1/sessions/nope/report", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn item_flow_and_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let id = create(&app, "subject-1").await;

    let (status, item) = call_json(&app, "GET", &format!("/v1/sessions/{id}/next"), None).await;
    assert_eq!(status, StatusCode::OK);
    let keys: Vec<&String> = item.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["choices", "image_url", "item_id", "prompt"]);

    // a second request before answering is out of order
    assert_eq!(call(&app, "GET", &format!("/v1/sessions/{id}/next"), None).await.0, StatusCode::CONFLICT);

    let (status, png) = call(&app, "GET", item["image_url"].as_str().unwrap(), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(&png[1..4], b"PNG");

    let item_id = item["item_id"].as_str().unwrap();
    let k = item["choices"].as_array().unwrap().len();
    let uri = format!("/v1/sessions/{id}/answers");
    let (status, _) = call_json(&app, "POST", &uri, Some(json!({ "item_id": item_id, "choice": k }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call_json(&app, "POST", &uri, Some(json!({ "item_id": "stale", "choice": 0 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, v) = call_json(&app, "POST", &uri, Some(json!({ "item_id": item_id, "choice": 0 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(v["status"] == "continue" || v["status"] == "verdict");
    // answering the same item twice is stale
    let (status, _) = call_json(&app, "POST", &uri, Some(json!({ "item_id": item_id, "choice": 0 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

/// Plays a session to its verdict over HTTP using image perception only.
async fn play(app: &Router, id: &str) -> Value {
    let bias = BiasModel::default();
    loop {
        let (status, item) = call_json(app, "GET", &format!("/v1/sessions/{id}/next"), None).await;
        assert_eq!(status, StatusCode::OK);
        let (_, png) = call(app, "GET", item["image_url"].as_str().unwrap(), None).await;
        let choices: Vec<String> = serde_json::from_value(item["choices"].clone()).unwrap();
        let choice = vision::perceive(item["prompt"].as_str().unwrap(), &choices, &png, &bias).unwrap();
        let (status, v) = call_json(
            app,
            "POST",
            &format!("/v1/sessions/{id}/answers"),
            Some(json!({ "item_id": item["item_id"], "choice": choice, "latency_ms": 5 })),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        if v["status"] == "verdict" {
            return v;
        }
    }
}

#[tokio::test]
async fn image_perceiver_reaches_perceiver_verdict_and_session_closes() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let id = create(&app, "vision").await;
    let v = play(&app, &id).await;
    assert_eq!(v["label"], "perceiver");
    assert!(v["p_value"].as_f64().unwrap() < 0.05);
    assert_eq!(call(&app, "GET", &format!("/v1/sessions/{id}/next"), None).await.0, StatusCode::GONE);

    let (status, report) = call_json(&app, "GET", &format!("/v1/sessions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(report["issued"][0]["item"]["veridical_idx"].is_u64());
}

#[tokio::test]
async fn restart_restores_sessions_from_logs() {
    let dir = tempfile::tempdir().unwrap();
    let (id, item_id, before) = {
        let (app, _) = app(dir.path());
        let id = create(&app, "restart").await;
        let (_, item) = call_json(&app, "GET", &format!("/v1/sessions/{id}/next"), None).await;
        let (_, before) = call_json(&app, "GET", &format!("/v1/sessions/{id}/report"), None).await;
        (id, item["item_id"].as_str().unwrap().to_string(), before)
    };
    let (app, state) = app(dir.path());
    assert_eq!(state.session_count(), 1);
    let (_, after) = call_json(&app, "GET", &format!("/v1/sessions/{id}/report"), None).await;
    assert_eq!(before, after);
    assert_eq!(call(&app, "GET", &format!("/v1/items/{item_id}/image.png"), None).await.0, StatusCode::OK);
    let (status, _) = call_json(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/answers"),
        Some(json!({ "item_id": item_id, "choice": 1 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn torn_log_tail_is_dropped_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let (app, _) = app(dir.path());
        let id = create(&app, "torn").await;
        call_json(&app, "GET", &format!("/v1/sessions/{id}/next"), None).await;
        id
    };
    let log = dir.path().join("sessions").join(format!("{id}.jsonl"));
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{\"event\":\"answ");
    std::fs::write(&log, text).unwrap();

    let (app, _) = app(dir.path());
    let (_, item) = call_json(&app, "GET", &format!("/v1/sessions/{id}/report"), None).await;
    let item_id = item["issued"][0]["item"]["item_id"].as_str().unwrap().to_string();
    let (status, _) = call_json(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/answers"),
        Some(json!({ "item_id": item_id, "choice": 0 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    // the log is well formed again
    drop(app);
    let (_, state) = self::app(dir.path());
    assert_eq!(state.session_count(), 1);
}
