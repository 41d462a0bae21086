use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use csi_core::synth::{generate, Scenario};
use csi_sniffer::broker::EmbeddedBroker;
use csi_sniffer::collector::{run_collector, Collector, CollectorOptions};
use csi_sniffer::control::{ControlOptions, ControlService};
use csi_sniffer::http::router;
use csi_sniffer::store::ConfigStore;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const ROOM: &str = r#"{"name":"room","band":"2.4","bandwidth":20,"channel":6,"device_filter":["02:00:00:00:00:01"]}"#;

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>, axum::http::HeaderMap) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, headers)
}

async fn json_call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let (status, bytes, _) = call(app, method, uri, body).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn service(dir: &std::path::Path, broker: &str, timeout: Duration) -> Arc<ControlService> {
    let store = ConfigStore::open(dir.join("configs.json")).unwrap();
    let mut opts = ControlOptions::new(broker);
    opts.download_timeout = timeout;
    ControlService::spawn(store, &opts).unwrap()
}

/// A loopback port nobody listens on.
fn dead_broker() -> String {
    let probe = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    probe.local_addr().unwrap().to_string()
}

#[tokio::test]
async fn crud_without_broker() {
    let dir = tempfile::tempdir().unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<h1>dashboard</h1>").unwrap();
    let app = router(service(dir.path(), &dead_broker(), Duration::from_secs(1)), Some(ui));

    let (status, health) = json_call(&app, Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(health, json!({"broker_connected": false, "configs": 0}));

    let (status, created) = json_call(&app, Method::POST, "/configs", Some(ROOM)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(created["status"], "stopped");
    assert_eq!(json_call(&app, Method::POST, "/configs", Some(ROOM)).await.0, StatusCode::CONFLICT);

    let wide = r#"{"name":"wide","band":"2.4","bandwidth":80,"channel":6}"#;
    let (status, err) = json_call(&app, Method::POST, "/configs", Some(wide)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(err["error"].as_str().unwrap().contains("80"));
    assert_eq!(json_call(&app, Method::POST, "/configs", Some("{")).await.0, StatusCode::BAD_REQUEST);
    let bad_name = r#"{"name":"../x","band":"5","bandwidth":40,"channel":36}"#;
    assert_eq!(json_call(&app, Method::POST, "/configs", Some(bad_name)).await.0, StatusCode::BAD_REQUEST);

    let (status, list) = json_call(&app, Method::GET, "/configs", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(json_call(&app, Method::GET, "/configs/nope", None).await.0, StatusCode::NOT_FOUND);

    let moved = r#"{"name":"room","band":"5","bandwidth":40,"channel":36,"description":"lab"}"#;
    let (status, updated) = json_call(&app, Method::PUT, "/configs/room", Some(moved)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(updated["band"], "5");
    assert_eq!(updated["device_filter"], json!([]));

    // nothing can reach the collector
    assert_eq!(json_call(&app, Method::POST, "/configs/room/start", None).await.0, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(json_call(&app, Method::GET, "/configs/room/output", None).await.0, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(json_call(&app, Method::POST, "/configs/room/stop", None).await.0, StatusCode::CONFLICT);

    let (status, page, _) = call(&app, Method::GET, "/ui/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(page, b"<h1>dashboard</h1>");

    assert_eq!(call(&app, Method::DELETE, "/configs/room", None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(call(&app, Method::DELETE, "/configs/room", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn capture_lifecycle_over_broker() {
    let dir = tempfile::tempdir().unwrap();
    let broker = EmbeddedBroker::loopback().unwrap().addr.to_string();

    let mut sc = Scenario::new(3, 20.0, 40.0);
    sc.activity_intervals = vec![(5.0, 10.0)];
    let source = generate(&sc).unwrap().0;
    let captures = dir.path().join("captures");
    let collector = Collector::new(source, CollectorOptions { capture_dir: captures.clone(), acceleration: 0.0 }).unwrap();
    let handle = run_collector(collector, &broker, "http-test-collector").unwrap();
    assert!(handle.wait_ready(Duration::from_secs(10)));

    let svc = service(dir.path(), &broker, Duration::from_secs(10));
    assert!(svc.wait_connected(Duration::from_secs(10)).await);
    let app = router(svc, None);

    assert_eq!(json_call(&app, Method::POST, "/configs", Some(ROOM)).await.0, StatusCode::CREATED);
    let (status, started) = json_call(&app, Method::POST, "/configs/room/start", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(started["status"], "running");
    assert_eq!(json_call(&app, Method::POST, "/configs/room/start", None).await.0, StatusCode::CONFLICT);
    assert_eq!(call(&app, Method::DELETE, "/configs/room", None).await.0, StatusCode::CONFLICT);
    assert_eq!(json_call(&app, Method::PUT, "/configs/room", Some(ROOM)).await.0, StatusCode::CONFLICT);

    tokio::time::sleep(Duration::from_millis(300)).await;
    assert_eq!(json_call(&app, Method::POST, "/configs/room/stop", None).await.0, StatusCode::OK);

    let (status, body, headers) = call(&app, Method::GET, "/configs/room/output", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(headers["content-type"].to_str().unwrap().starts_with("text/csv"));
    let rows: u64 = headers["x-row-count"].to_str().unwrap().parse().unwrap();
    assert!(rows > 0);
    assert_eq!(body, std::fs::read(captures.join("room.csv")).unwrap());

    // the collector rejects a capture it never saw
    let other = r#"{"name":"other","band":"2.4","bandwidth":20,"channel":1}"#;
    assert_eq!(json_call(&app, Method::POST, "/configs", Some(other)).await.0, StatusCode::CREATED);
    let (status, err) = json_call(&app, Method::GET, "/configs/other/output", None).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY, "{err}");
    handle.stop();
}

#[tokio::test(flavor = "multi_thread")]
async fn download_times_out_without_collector() {
    let dir = tempfile::tempdir().unwrap();
    let broker = EmbeddedBroker::loopback().unwrap().addr.to_string();
    let svc = service(dir.path(), &broker, Duration::from_millis(300));
    assert!(svc.wait_connected(Duration::from_secs(10)).await);
    let app = router(svc, None);
    assert_eq!(json_call(&app, Method::POST, "/configs", Some(ROOM)).await.0, StatusCode::CREATED);
    let (status, err) = json_call(&app, Method::GET, "/configs/room/output", None).await;
    assert_eq!(status, StatusCode::GATEWAY_TIMEOUT);
    assert!(err["error"].as_str().unwrap().contains("timed out"));
    assert_eq!(json_call(&app, Method::GET, "/healthz", None).await.1["broker_connected"], true);
}
