use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use timflow_core::surrogate::{Hyperparams, SurrogateModel};
use timflow_core::GridSpec;
use timflow_service::{router, AppState, VERSION};
use tower::ServiceExt;

use crate::{ensure, Check};

async fn call(app: &Router, method: Method, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    call_accepting(app, method, uri, body, "application/json").await
}

async fn call_accepting(
    app: &Router,
    method: Method,
    uri: &str,
    body: &str,
    accept: &str,
) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .header("accept", accept)
        .body(Body::from(body.to_string()))
        .unwrap();
    let (parts, body) = app.clone().oneshot(req).await.unwrap().into_parts();
    (parts.status, body.collect().await.unwrap().to_bytes().to_vec())
}

fn zeros(n: usize, m: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; m]; n]
}

fn error(code: &str) -> Value {
    json!({"error": {"code": code}})
}

/// `expected` must equal `actual` except that an error `message` only has
/// to be a non-empty string.
fn matches(expected: &Value, actual: &Value) -> bool {
    match (expected, actual) {
        (Value::Object(e), Value::Object(a)) => {
            if let (Some(code), Some(err)) = (e.get("error"), a.get("error")) {
                return a.len() == 1
                    && err["code"] == code["code"]
                    && err["message"].as_str().is_some_and(|m| !m.is_empty());
            }
            e == a
        }
        _ => expected == actual,
    }
}

fn goldens() -> Vec<(Method, &'static str, String, StatusCode, Value)> {
    let line = r#"{"points": [[2.0, 2.5], [3.0, 2.5]], "feeds": [2.0]}"#;
    let mut axis = zeros(50, 50);
    for c in 10..14 {
        axis[10][c] = 1.0;
    }
    let mut blob = zeros(5, 5);
    blob[2][2] = 2.0;
    let mut traced = zeros(5, 5);
    traced[2][2] = 1.0;
    for (r, c) in [(1, 2), (3, 2), (2, 1), (2, 3)] {
        traced[r][c] = 0.25;
    }
    let post = Method::POST;
    vec![
        (
            post.clone(),
            "/api/v1/discretize",
            r#"{"pattern": {"points": [[10.0, 10.5], [14.0, 10.5]], "feeds": [1.0]}}"#.into(),
            StatusCode::OK,
            json!({"resolution": [50, 50], "total_mass": 4.0, "dispensed": axis}),
        ),
        (
            post.clone(),
            "/api/v1/compress",
            format!(r#"{{"pattern": {line}, "model": "heuristic", "resolution": [5, 5], "schedule": "single"}}"#),
            StatusCode::OK,
            json!({
                "model": "heuristic", "resolution": [5, 5], "gap": 1.0,
                "dispensed": blob, "compressed": traced,
                "coverage_ratio": 0.2, "void_count": 0, "off_grid_mass": 0.0, "iterations": 1
            }),
        ),
        (
            post.clone(),
            "/api/v1/compress",
            r#"{"pattern": {"points": [[1, 1], [3, 2]], "feeds": [0]}, "model": "heuristic", "resolution": [4, 4]}"#.into(),
            StatusCode::OK,
            json!({
                "model": "heuristic", "resolution": [4, 4], "gap": 1.0,
                "dispensed": zeros(4, 4), "compressed": zeros(4, 4),
                "coverage_ratio": 0.0, "void_count": 0, "off_grid_mass": 0.0, "iterations": 0
            }),
        ),
        (
            Method::GET,
            "/api/v1/health",
            String::new(),
            StatusCode::OK,
            json!({"status": "ok", "model_loaded": false, "version": VERSION}),
        ),
        (post.clone(), "/api/v1/discretize", "{oops".into(), StatusCode::BAD_REQUEST, error("invalid_pattern")),
        (
            post.clone(),
            "/api/v1/compress",
            format!(r#"{{"pattern": {line}, "model": "heuristic", "colour": "red"}}"#),
            StatusCode::BAD_REQUEST,
            error("invalid_request"),
        ),
        (
            post.clone(),
            "/api/v1/discretize",
            format!(r#"{{"pattern": {line}, "resolution": [2, 2]}}"#),
            StatusCode::BAD_REQUEST,
            error("out_of_bounds"),
        ),
        (
            post.clone(),
            "/api/v1/discretize",
            format!(r#"{{"pattern": {line}, "resolution": [1000000, 1000000]}}"#),
            StatusCode::BAD_REQUEST,
            error("resolution_limit"),
        ),
        (
            post.clone(),
            "/api/v1/compress",
            r#"{"pattern": {"points": [[0, 0.5], [4, 0.5]], "feeds": [20]}, "model": "heuristic", "resolution": [4, 4]}"#.into(),
            StatusCode::CONFLICT,
            error("overflow"),
        ),
        (
            post.clone(),
            "/api/v1/compress",
            format!(r#"{{"pattern": {line}, "model": "surrogate", "resolution": [5, 5]}}"#),
            StatusCode::SERVICE_UNAVAILABLE,
            error("model_unavailable"),
        ),
        (post.clone(), "/api/v1/elsewhere", "{}".into(), StatusCode::NOT_FOUND, error("not_found")),
        (Method::DELETE, "/api/v1/health", String::new(), StatusCode::METHOD_NOT_ALLOWED, error("method_not_allowed")),
    ]
}

async fn run() -> Check {
    let app = router(AppState::default());
    let cases = goldens();
    for (method, uri, body, status, expected) in &cases {
        let (got_status, bytes) = call(&app, method.clone(), uri, body).await;
        let got: Value = serde_json::from_slice(&bytes).map_err(|e| format!("{uri}: {e}"))?;
        ensure(got_status == *status && matches(expected, &got), || {
            format!("{method} {uri} {body}: got {got_status} {got}")
        })?;
    }

    let line = r#"{"points": [[2.0, 2.5], [3.0, 2.5]], "feeds": [2.0]}"#;
    let body = format!(r#"{{"pattern": {line}, "resolution": [5, 5]}}"#);
    let (status, bytes) = call_accepting(&app, Method::POST, "/api/v1/discretize", &body, "text/html").await;
    let got: Value = serde_json::from_slice(&bytes).unwrap();
    ensure(status == StatusCode::NOT_ACCEPTABLE && matches(&error("not_acceptable"), &got), || {
        format!("text/html: {status} {got}")
    })?;
    let (status, bytes) =
        call_accepting(&app, Method::POST, "/api/v1/discretize", &body, "application/x-timd").await;
    ensure(status == StatusCode::OK && bytes.starts_with(b"TIMD"), || format!("TIMD negotiation: {status}"))?;

    // a loaded model flips the health flag and serves its own resolution only
    let spec = GridSpec::new(5, 5).unwrap();
    let hp = Hyperparams { conv_layers: 1, filters: 2, kernel: 3, dense_layers: 0, dense_width: 25, batch_size: 1, learning_rate: 1e-3, epochs: 1 };
    let loaded = router(AppState::new(Some(SurrogateModel::zeros(hp, spec).map_err(|e| e.to_string())?)));
    let (_, health) = call(&loaded, Method::GET, "/api/v1/health", "").await;
    let health: Value = serde_json::from_slice(&health).unwrap();
    ensure(health["model_loaded"] == json!(true), || format!("health with model: {health}"))?;
    let (status, bytes) = call(
        &loaded,
        Method::POST,
        "/api/v1/compress",
        &format!(r#"{{"pattern": {line}, "model": "surrogate", "resolution": [6, 6]}}"#),
    )
    .await;
    let got: Value = serde_json::from_slice(&bytes).unwrap();
    ensure(status == StatusCode::BAD_REQUEST && matches(&error("resolution_mismatch"), &got), || {
        format!("mismatch: {status} {got}")
    })?;

    let body = r#"{"pattern": {"points": [[12, 20], [38, 28], [20, 36]], "feeds": [2.5, 1.75]}, "model": "heuristic"}"#;
    let mut set = tokio::task::JoinSet::new();
    for _ in 0..100 {
        let app = app.clone();
        set.spawn(async move { call(&app, Method::POST, "/api/v1/compress", body).await });
    }
    let mut bodies = Vec::with_capacity(100);
    while let Some(joined) = set.join_next().await {
        let (status, bytes) = joined.map_err(|e| e.to_string())?;
        ensure(status == StatusCode::OK, || format!("concurrent request got {status}"))?;
        bodies.push(bytes);
    }
    ensure(bodies.iter().all(|b| *b == bodies[0]), || "concurrent bodies differ".into())?;
    Ok(format!(
        "{} golden exchanges plus not_acceptable, TIMD and resolution_mismatch, 100 concurrent identical bodies",
        cases.len()
    ))
}

pub fn contract() -> Check {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?
        .block_on(run())
}
