mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use clickrank::corpus::Stoplist;
use clickrank::exec::Execution;
use clickrank::pipeline::PipelineBundle;
use clickrank_cli::router;
use serde_json::Value;
use tower::ServiceExt;

async fn get(uri: &str) -> (StatusCode, Value) {
    let bundle = PipelineBundle::load(common::workspace().dir(), Stoplist::default_bilingual(), Execution::default()).unwrap();
    let resp = router(Arc::new(bundle)).oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    let body = axum::body::to_bytes(resp.into_body(), 1 << 20).await.unwrap();
    (status, serde_json::from_slice(&body).unwrap())
}

fn first_query() -> String {
    common::workspace().pairs().unwrap()[0].query_key()
}

#[tokio::test]
async fn health_is_ok() {
    let (status, body) = get("/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn search_returns_at_most_k_results() {
    let q = first_query().replace(' ', "+");
    let (status, body) = get(&format!("/search?q={q}&k=3")).await;
    assert_eq!(status, StatusCode::OK);
    let results = body["results"].as_array().unwrap();
    assert!(!results.is_empty() && results.len() <= 3);
    assert!(body["took_seconds"].as_f64().unwrap() > 0.0);
    assert_eq!(body["query"], first_query());
    assert!(results.iter().all(|r| r["doc_id"].is_string() && r["score"].is_f64()));
}

#[tokio::test]
async fn default_k_is_ten() {
    let q = first_query().replace(' ', "+");
    let (_, body) = get(&format!("/search?q={q}")).await;
    assert!(body["results"].as_array().unwrap().len() <= 10);
}

#[tokio::test]
async fn bad_requests_are_rejected() {
    assert_eq!(get("/search?k=3").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get("/search?q=a&k=-1").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get("/search?q=a&k=many").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get("/search?q=a&k=101").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn empty_and_unknown_queries_succeed() {
    for q in ["", "the+and", "zzqqxx"] {
        let (status, body) = get(&format!("/search?q={q}&k=5")).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["results"].as_array().unwrap().len(), 0);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_leave_artifacts_untouched() {
    let snapshot = || -> std::collections::BTreeMap<String, Vec<u8>> {
        std::fs::read_dir(common::workspace().dir())
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.display().to_string(), std::fs::read(&p).unwrap()))
            .collect()
    };
    let before = snapshot();
    let bundle = Arc::new(PipelineBundle::load(common::workspace().dir(), Stoplist::default_bilingual(), Execution::default()).unwrap());
    let app = router(bundle);
    let pairs = common::workspace().pairs().unwrap();
    let queries: Vec<String> = pairs.iter().take(64).map(|p| p.query_key().replace(' ', "+")).collect();
    let mut tasks = Vec::new();
    for q in queries.iter().chain(queries.iter()).cloned() {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let resp = app.oneshot(Request::get(format!("/search?q={q}&k=5")).body(Body::empty()).unwrap()).await.unwrap();
            let status = resp.status();
            let body = axum::body::to_bytes(resp.into_body(), 1 << 20).await.unwrap();
            let v: Value = serde_json::from_slice(&body).unwrap();
            (status, q, v["results"].clone())
        }));
    }
    let mut seen: std::collections::HashMap<String, Value> = std::collections::HashMap::new();
    for t in tasks {
        let (status, q, results) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        if let Some(prev) = seen.insert(q.clone(), results.clone()) {
            assert_eq!(prev, results, "query {q} answered differently");
        }
    }
    assert_eq!(snapshot(), before);
}
