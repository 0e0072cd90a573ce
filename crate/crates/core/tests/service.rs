#![cfg(feature = "server")]

use std::path::Path;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use misinfo_core::annotation::{AnnotationStore, LabeledDataset};
use misinfo_core::corpus::{Dataset, TweetRecord};
use misinfo_core::service::{self, AppState};

fn dataset() -> Dataset {
    let records = (1..=4)
        .map(|i| TweetRecord::new(format!("t{i}"), format!("vaccine tweet {i}"), None).unwrap())
        .collect();
    Dataset::new(records, "service").unwrap()
}

fn app(journal: &Path, out: Option<&Path>) -> Router {
    let store = AnnotationStore::open(dataset(), journal).unwrap();
    service::router(AppState::new(store, out.map(Path::to_path_buf)), None)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn label(app: &Router, tweet: &str, annotator: &str, l: &str) -> (StatusCode, Value) {
    call(
        app,
        Method::POST,
        "/api/labels",
        Some(json!({"tweet_id": tweet, "annotator_id": annotator, "label": l})),
    )
    .await
}

#[tokio::test]
async fn next_is_stable_until_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("j.csv"), None);
    let (s, first) = call(&app, Method::GET, "/api/next?annotator=ann1", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(first["tweet"]["id"], "t1");
    assert_eq!(first["progress"], json!({"labeled": 0, "total": 4}));
    let (_, again) = call(&app, Method::GET, "/api/next?annotator=ann1", None).await;
    assert_eq!(again, first);
    let (s, body) = label(&app, "t1", "ann1", "M").await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(body["record"]["label"], "M");
    assert_eq!(body["vote"]["status"], "decided");
    let (_, next) = call(&app, Method::GET, "/api/next?annotator=ann1", None).await;
    assert_eq!(next["tweet"]["id"], "t2");
    let (_, other) = call(&app, Method::GET, "/api/next?annotator=ann2", None).await;
    assert_eq!(other["tweet"]["id"], "t1");
}

#[tokio::test]
async fn bad_requests_are_json_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("j.csv"), None);
    let (s, b) = call(&app, Method::GET, "/api/next", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(b["error"].as_str().unwrap().contains("annotator"));
    let (s, b) = label(&app, "t1", "ann1", "X").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(b["error"].is_string());
    let (s, _) = label(&app, "nope", "ann1", "M").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, b) = call(&app, Method::POST, "/api/labels", Some(json!({"tweet_id": "t1"}))).await;
    assert!(s.is_client_error(), "{s}");
    assert!(b["error"].is_string());
    let (s, _) = call(&app, Method::POST, "/api/adjudications", Some(json!({"tweet_id": "t1", "label": "M"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn ties_block_finalize_until_adjudicated() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("labeled.jsonl");
    let app = app(&dir.path().join("j.csv"), Some(&out));
    for (t, a, l) in [
        ("t1", "a", "M"),
        ("t1", "b", "M"),
        ("t1", "c", "T"),
        ("t2", "a", "M"),
        ("t2", "b", "T"),
        ("t3", "a", "N"),
    ] {
        assert_eq!(label(&app, t, a, l).await.0, StatusCode::CREATED);
    }
    let (_, ties) = call(&app, Method::GET, "/api/ties", None).await;
    assert_eq!(ties.as_array().unwrap().len(), 1);
    assert_eq!(ties[0]["tweet_id"], "t2");
    assert_eq!(ties[0]["text"], "vaccine tweet 2");

    let (s, body) = call(&app, Method::POST, "/api/finalize", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["unresolved"], json!(["t2"]));
    assert!(!out.exists());

    let (s, _) = call(&app, Method::POST, "/api/adjudications", Some(json!({"tweet_id": "t2", "label": "U"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, body) = call(&app, Method::POST, "/api/adjudications", Some(json!({"tweet_id": "t2", "label": "T"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["open_ties"], 0);

    let (s, body) = call(&app, Method::POST, "/api/finalize", None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["labeled"], 3);
    assert_eq!(body["class_counts"], json!({"T": 1, "M": 1, "I": 0, "N": 1, "U": 0}));
    assert_eq!(body["excluded"], json!(["t4"]));
    assert_eq!(LabeledDataset::load(&out).unwrap().len(), 3);

    let (_, agreement) = call(&app, Method::GET, "/api/agreement", None).await;
    assert_eq!(agreement["ties"], 1);
    let (_, session) = call(&app, Method::GET, "/api/session?annotator=a", None).await;
    assert_eq!(session["tweets"], 4);
    assert_eq!(session["annotators"], json!(["a", "b", "c"]));
    assert_eq!(session["labeled_tweets"], 3);
    assert_eq!(session["open_ties"], 0);
    assert_eq!(session["progress"]["labeled"], 3);
    assert_eq!(session["history"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn labels_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.csv");
    {
        let app = app(&journal, None);
        label(&app, "t1", "ann", "T").await;
        label(&app, "t2", "ann", "M").await;
        label(&app, "t2", "ann", "I").await;
    }
    let app = app(&journal, None);
    let (_, next) = call(&app, Method::GET, "/api/next?annotator=ann", None).await;
    assert_eq!(next["tweet"]["id"], "t3");
    let (_, session) = call(&app, Method::GET, "/api/session?annotator=ann", None).await;
    assert_eq!(session["history"], json!([{"tweet_id": "t1", "label": "T"}, {"tweet_id": "t2", "label": "I"}]));
}

#[tokio::test]
async fn static_files_are_served_beside_the_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>ui</h1>").unwrap();
    let store = AnnotationStore::open(dataset(), &dir.path().join("j.csv")).unwrap();
    let app = service::router(AppState::new(store, None), Some(dir.path().to_path_buf()));
    let resp = app
        .clone()
        .oneshot(Request::get("/index.html").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let (s, _) = call(&app, Method::GET, "/api/ties", None).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn bind_reports_port_in_use() {
    let listener = service::bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let err = service::bind(addr).await.unwrap_err();
    assert!(err.is_user_error());
    assert!(err.to_string().contains("already in use"), "{err}");
}

#[tokio::test]
async fn serves_over_tcp_and_shuts_down() {
    let dir = tempfile::tempdir().unwrap();
    let listener = service::bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(service::serve(listener, app(&dir.path().join("j.csv"), None), async {
        let _ = rx.await;
    }));
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    stream
        .write_all(b"GET /api/ties HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut buf = String::new();
    stream.read_to_string(&mut buf).await.unwrap();
    assert!(buf.starts_with("HTTP/1.1 200"), "{buf}");
    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}
