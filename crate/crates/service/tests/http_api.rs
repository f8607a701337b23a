//! The HTTP API exercised in-process, including the payloads the study UI
//! sends.

mod support;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use reflective_service::http::router;
use serde_json::{json, Value};
use tower::ServiceExt;

use support::mock_engine;

fn app() -> Router {
    router(Arc::new(mock_engine()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => builder.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn json_call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call(app, method, uri, body).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

async fn session(app: &Router) -> String {
    let (status, body) = json_call(app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["session_token"].as_str().unwrap().to_string()
}

async fn new_story(app: &Router, token: &str) -> Value {
    let (status, body) = json_call(
        app,
        "POST",
        "/stories",
        Some(json!({"session_token": token, "persona_id": "persona-a", "dialogue_type": "inquiry", "creativity": "high"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body
}

/// Evaluation body as the UI submits it.
fn ui_evaluation(story: &str, token: &str, inconsistency: &str, disturbance: Option<u8>) -> Value {
    let mut body = json!({
        "narrative_id": story,
        "respondent_id": token,
        "purpose_selections": ["inq-notice", "open"],
        "liking": 4,
        "creativity_rating": 5,
        "creativity_judgement": "too_much",
        "inconsistency": inconsistency,
        "inconsistency_explanation": "The marathon part did not fit.",
    });
    if let Some(d) = disturbance {
        body["disturbance"] = json!(d);
    }
    body
}

const SCORE_FIELDS: [&str; 8] = ["reflection", "q_final", "h_final", "q_struct", "h_struct", "q_llm", "h_llm", "inconsistency_flags"];

fn assert_no_scores(view: &Value) {
    let text = view.to_string();
    for field in SCORE_FIELDS {
        assert!(!text.contains(&format!("\"{field}\"")), "story view leaks {field}: {text}");
    }
}

#[tokio::test]
async fn personas_are_listed() {
    let app = app();
    let (status, body) = json_call(&app, "GET", "/personas", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = body.as_array().unwrap();
    assert_eq!(list.len(), 5);
    assert_eq!(list[0]["id"], "persona-a");
    assert!(list[0]["activities"].as_array().unwrap().len() >= 6);
}

#[tokio::test]
async fn story_delivery_hides_reflection_and_reflection_follows() {
    let app = app();
    let token = session(&app).await;
    let story = new_story(&app, &token).await;
    assert_no_scores(&story);
    assert_eq!(story["paragraphs"].as_array().unwrap().len(), 3);
    let id = story["id"].as_str().unwrap();

    let (status, fetched) = json_call(&app, "GET", &format!("/stories/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fetched, story);
    assert_no_scores(&fetched);

    let mut status_seen = String::new();
    for _ in 0..100 {
        let (_, r) = json_call(&app, "GET", &format!("/stories/{id}/reflection"), None).await;
        status_seen = r["status"].as_str().unwrap().to_string();
        if status_seen != "pending" {
            assert!(r["report"]["h_final"].is_number());
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    assert_eq!(status_seen, "done");
}

#[tokio::test]
async fn unknown_things_are_404() {
    let app = app();
    assert_eq!(call(&app, "GET", "/stories/nope", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/stories/nope/reflection", None).await.0, StatusCode::NOT_FOUND);
    let (status, body) = json_call(
        &app,
        "POST",
        "/stories",
        Some(json!({"persona_id": "persona-z", "dialogue_type": "inquiry", "creativity": "low"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");
    let (status, _) = json_call(
        &app,
        "POST",
        "/stories",
        Some(json!({"session_token": "forged", "persona_id": "persona-a", "dialogue_type": "inquiry", "creativity": "low"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bad_enum_is_rejected() {
    let app = app();
    let (status, _) = call(
        &app,
        "POST",
        "/stories",
        Some(json!({"persona_id": "persona-a", "dialogue_type": "negotiation", "creativity": "low"})),
    )
    .await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn evaluation_contract() {
    let app = app();
    let token = session(&app).await;
    let story = new_story(&app, &token).await;
    let id = story["id"].as_str().unwrap();

    // disturbance without an inconsistency
    let (status, body) = json_call(&app, "POST", "/evaluations", Some(ui_evaluation(id, &token, "no", Some(3)))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "validation_error");
    // inconsistency without disturbance
    let (status, _) = json_call(&app, "POST", "/evaluations", Some(ui_evaluation(id, &token, "yes", None))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = json_call(&app, "POST", "/evaluations", Some(ui_evaluation(id, &token, "yes", Some(2)))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert!(body["id"].is_number());

    let (status, body) = json_call(&app, "POST", "/evaluations", Some(ui_evaluation(id, &token, "not_sure", None))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "duplicate_evaluation");

    let (status, _) = json_call(&app, "POST", "/evaluations", Some(ui_evaluation("ghost", &token, "no", None))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let mut liking_missing = ui_evaluation(id, &session(&app).await, "no", None);
    liking_missing.as_object_mut().unwrap().remove("liking");
    assert!(call(&app, "POST", "/evaluations", Some(liking_missing)).await.0.is_client_error());
}

#[tokio::test]
async fn post_study_contract() {
    let app = app();
    let token = session(&app).await;
    let body = json!({
        "respondent_id": token,
        "overall_reflection": "Made me think about my walks.",
        "overall_relevance": 4,
        "cultural_relatability": "maybe",
        "future_use": "yes",
        "future_use_comment": "on bad days",
        "persona_relatedness": 3,
    });
    let (status, _) = json_call(&app, "POST", "/post-study", Some(body.clone())).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, reply) = json_call(&app, "POST", "/post-study", Some(body.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(reply["error"], "duplicate_post_study");
    let mut bad = body;
    bad["respondent_id"] = json!(session(&app).await);
    bad["overall_relevance"] = json!(0);
    assert_eq!(json_call(&app, "POST", "/post-study", Some(bad)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn report_endpoints() {
    let app = app();
    let (status, body) = json_call(&app, "GET", "/report", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["purpose_table"].is_object());
    let (status, csv) = call(&app, "GET", "/report/risk_bins", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(csv.starts_with("bin,n,inconsistent"));
    assert_eq!(call(&app, "GET", "/report/nonsense", None).await.0, StatusCode::NOT_FOUND);
}
