use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use flexq_core::ResolverConfig;
use flexq_service::{router, Engine, EngineConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Harness {
    app: axum::Router,
    dir: tempfile::TempDir,
}

fn harness() -> Harness {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let dir = tempfile::tempdir().unwrap();
    let lexicon = dir.path().join("lexicon.json");
    std::fs::copy(fixtures.join("lexicon.json"), &lexicon).unwrap();
    let engine = Engine::load(&EngineConfig {
        catalog: fixtures.join("catalog.json"),
        data_dir: fixtures.join("data"),
        lexicon,
        knowledge: Some(dir.path().join("kb.jsonl")),
        resolver: ResolverConfig::default(),
    })
    .unwrap();
    Harness {
        app: router(Arc::new(engine), None),
        dir,
    }
}

impl Harness {
    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json");
        let req = match body {
            Some(b) => req.body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call("POST", uri, Some(body)).await
    }
}

const ORDERS: &str = "Display the details of orders whose unit price is greater than 200";

#[tokio::test]
async fn translate_execute_feedback_cycle() {
    let h = harness();
    let (s, t) = h.post("/api/translate", json!({ "query": ORDERS })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(t["source"], "pipeline");
    assert_eq!(t["trace"][0]["stage"], "parse");
    let id = t["queryId"].as_str().unwrap().to_string();

    let (s, rs) = h.post("/api/execute", json!({ "queryId": id })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(rs["rowCount"], 6);
    assert_eq!(rs["columns"][0], json!({ "table": "orders", "field": "OrderID" }));
    assert_eq!(rs["rows"][0][0], 10329);

    let (s, fb) = h
        .post("/api/feedback", json!({ "queryId": id, "verdict": "accept", "note": "right" }))
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(fb["status"], "accepted");
    assert_eq!(fb["accepts"], 1);

    let (_, again) = h.post("/api/translate", json!({ "query": ORDERS })).await;
    assert_eq!(again["source"], "knowledge-base");
    assert_eq!(again["sql"], t["sql"]);
    assert_eq!(again["trace"][0]["stage"], "knowledge-base hit");

    let (s, entries) = h
        .call("GET", "/api/kb?key=display%20the%20details%20of%20orders%20whose%20unit%20price%20is%20greater%20than%20200", None)
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(entries.as_array().unwrap().len(), 1);
    assert_eq!(entries[0]["notes"], json!(["right"]));
    assert!(h.dir.path().join("kb.jsonl").exists());
}

#[tokio::test]
async fn schema_lists_tables() {
    let h = harness();
    let (s, v) = h.call("GET", "/api/schema", None).await;
    assert_eq!(s, StatusCode::OK);
    let names: Vec<&str> = v["tables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["orders", "orderdetails", "suppliers"]);
    assert_eq!(v["tables"][2]["primaryKey"], "sno");
    assert_eq!(v["tables"][2]["rowCount"], 10);
}

#[tokio::test]
async fn error_statuses() {
    let h = harness();
    let (s, v) = h.post("/api/translate", json!({ "query": "  " })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "empty-query");

    let (s, v) = h.post("/api/execute", json!({ "queryId": "kb-999999" })).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown-entry");

    let (_, t) = h
        .post("/api/translate", json!({ "query": "list suppliers where city equals Paris" }))
        .await;
    let (s, v) = h
        .post("/api/feedback", json!({ "queryId": t["queryId"], "verdict": "maybe" }))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad-verdict");

    let (_, t) = h
        .post("/api/translate", json!({ "query": "list suppliers where city greater than Paris" }))
        .await;
    let (s, v) = h.post("/api/execute", json!({ "queryId": t["queryId"] })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "type-mismatch");

    let (s, v) = h
        .post("/api/translate", json!({ "query": "list suppliers where qqqqqq equals 1" }))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "unresolvable-field");
    assert!(v["candidates"].as_array().is_some_and(|c| !c.is_empty()));
}

#[tokio::test]
async fn unknown_conjunction_can_be_taught() {
    let h = harness();
    let q = json!({ "query": "list suppliers when city equals London" });
    let (s, v) = h.post("/api/translate", q.clone()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "unknown-conjunction");
    assert_eq!(v["remedy"]["action"], "add-conjunction");
    assert!(v["remedy"]["suggestions"]
        .as_array()
        .unwrap()
        .contains(&json!("when")));

    let (s, v) = h.post("/api/lexicon/conjunctions", json!({ "word": "when" })).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["conjunctions"].as_array().unwrap().contains(&json!("when")));
    let saved = std::fs::read_to_string(h.dir.path().join("lexicon.json")).unwrap();
    assert!(saved.contains("\"when\""));

    let (s, v) = h.post("/api/translate", q).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["sql"], "SELECT * FROM suppliers AS A WHERE A.city = 'London'");

    let (s, v) = h.post("/api/lexicon/conjunctions", json!({ "word": "greater" })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "ambiguous-conjunction");
}
