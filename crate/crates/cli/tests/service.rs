use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use metanic_cli::service::router;
use metanic_core::nic::{analyze, AnalysisConfig};
use metanic_core::store::TrialStore;
use metanic_core::trial::read_trials;
use serde_json::{json, Value};
use tower::ServiceExt;

fn service_at(dir: &std::path::Path) -> Router {
    router(Arc::new(TrialStore::open(dir).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => request
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn trial(session: &str, k: u64, first: &str, second: &str, r2: f64) -> Value {
    json!({
        "session_id": session,
        "trial_index": k,
        "first_eval": first,
        "second_eval": second,
        "r1": 0.6,
        "r2": r2,
        "covariates": {"accuracy": 1, "response_time_ms": 712.5}
    })
}

#[tokio::test]
async fn session_lifecycle_and_error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = service_at(dir.path());

    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"session_id": "p01", "seed": 4}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let manifest = json_of(&body);
    assert_eq!(manifest["session_id"], "p01");
    assert_eq!(manifest["conditions"].as_array().unwrap().len(), 6);
    assert_eq!(manifest["evaluations"][0]["id"], "EC");

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"session_id": "p01"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, body) = call(&app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(json_of(&body)["session_id"].as_str().is_some());

    let (status, body) = call(&app, "POST", "/sessions/p01/trials", Some(trial("p01", 0, "EC", "EL", 0.4))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(json_of(&body)["duplicate"], false);

    let (status, body) = call(&app, "POST", "/sessions/p01/trials", Some(trial("p01", 0, "EC", "EL", 0.4))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body)["duplicate"], true);
    assert_eq!(json_of(&body)["total_trials"], 1);

    let (status, body) = call(&app, "POST", "/sessions/p01/trials", Some(trial("p01", 0, "EC", "EL", 0.9))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["error"], "idempotency_conflict");

    let (status, body) = call(&app, "POST", "/sessions/p01/trials", Some(trial("p01", 1, "EC", "EL", 1.3))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["field"], "r2");

    let (status, body) = call(&app, "POST", "/sessions/p01/trials", Some(json!({"trial_index": "x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["error"], "malformed_body");

    // The session id may come from the path alone.
    let mut no_id = trial("p01", 2, "EK", "EC", 0.5);
    no_id.as_object_mut().unwrap().remove("session_id");
    let (status, _) = call(&app, "POST", "/sessions/p01/trials", Some(no_id)).await;
    assert_eq!(status, StatusCode::CREATED);

    for (method, uri, body) in [
        ("GET", "/sessions/nope/next-condition", None),
        ("GET", "/sessions/nope/export", None),
        ("POST", "/sessions/nope/trials", Some(trial("nope", 0, "EC", "EL", 0.4))),
    ] {
        let (status, body) = call(&app, method, uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(json_of(&body)["error"], "unknown_session");
    }
}

#[tokio::test]
async fn scripted_session_exports_an_analyzable_file() {
    let dir = tempfile::tempdir().unwrap();
    let app = service_at(dir.path());
    call(&app, "POST", "/sessions", Some(json!({"session_id": "run1", "seed": 11}))).await;

    let mut first_six = Vec::new();
    for k in 0..12u64 {
        let (status, body) = call(&app, "GET", "/sessions/run1/next-condition", None).await;
        assert_eq!(status, StatusCode::OK);
        let a = json_of(&body);
        let (first, second) = (a["first_eval"].as_str().unwrap(), a["second_eval"].as_str().unwrap());
        assert!(!a["first_prompt"].as_str().unwrap().is_empty());
        if k < 6 {
            first_six.push(format!("{first}>{second}"));
        }
        let r2 = 0.1 + 0.07 * k as f64;
        let (status, _) = call(&app, "POST", "/sessions/run1/trials", Some(trial("run1", k, first, second, r2))).await;
        assert_eq!(status, StatusCode::CREATED);
    }
    first_six.sort();
    first_six.dedup();
    assert_eq!(first_six.len(), 6);

    let (status, exported) = call(&app, "GET", "/sessions/run1/export", None).await;
    assert_eq!(status, StatusCode::OK);
    let on_disk = std::fs::read(dir.path().join("sessions/run1/trials.jsonl")).unwrap();
    assert_eq!(exported, on_disk);

    let trials = read_trials(exported.as_slice()).unwrap();
    assert_eq!(trials.len(), 12);
    let mut counts = std::collections::BTreeMap::new();
    for t in &trials {
        *counts.entry((t.first_eval.clone(), t.second_eval.clone())).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 6);
    assert!(counts.values().all(|&c| c == 2));
    let report = analyze(&trials, &AnalysisConfig::default()).unwrap();
    assert_eq!(report.n_trials, 12);

    // A fresh service over the same directory sees the same data.
    let restarted = service_at(dir.path());
    let (_, again) = call(&restarted, "GET", "/sessions/run1/export", None).await;
    assert_eq!(again, exported);
    let (status, _) = call(&restarted, "POST", "/sessions/run1/trials", Some(trial("run1", 3, "EC", "EL", 0.0))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}
