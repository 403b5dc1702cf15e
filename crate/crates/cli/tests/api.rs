mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use featurekit::project::Project;
use featurekit::Execution;
use featurekit_cli::server::{router, AppState};

use common::scratch;

struct Api {
    app: Router,
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
}

fn api(fixture: &str) -> Api {
    let (dir, root) = scratch(fixture);
    let project = Project::load(&root, Execution::Parallel).unwrap();
    Api { app: router(Arc::new(AppState::new(project, Execution::Parallel))), _dir: dir, root }
}

impl Api {
    async fn call(&self, method: &str, uri: &str, version: Option<u64>, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(v) = version {
            req = req.header("If-Match", v.to_string());
        }
        let body = match body {
            Some(b) => {
                req = req.header("content-type", "application/json");
                Body::from(b.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, serde_json::from_slice(&bytes).unwrap())
    }

    async fn get(&self, uri: &str) -> Value {
        let (s, v) = self.call("GET", uri, None, None).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        v
    }
}

#[tokio::test]
async fn model_and_colors() {
    let a = api("languages");
    let v = a.get("/api/model").await;
    assert_eq!(v["project_version"], 0);
    assert_eq!(v["data"]["features"], json!(["App", "f_CHN", "f_GBR"]));
    assert_eq!(v["data"]["configurations"], 4);
    assert_eq!(v["data"]["model"]["root"], "App");

    let c = a.get("/api/colors").await;
    assert_eq!(c["data"].as_object().unwrap().len(), 3);

    // replace the model with an alternative group
    let (s, v) = a.call("PUT", "/api/model", Some(0), Some(json!({"afm": "App : (f_CHN | f_GBR) ;\n"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["project_version"], 1);
    assert_eq!(v["data"]["configurations"], 2);
    assert_eq!(std::fs::read_to_string(a.root.join("featuremodel.afm")).unwrap(), "App : (f_CHN | f_GBR) ;\n");

    // JSON form from GET is accepted back
    let model = a.get("/api/model").await["data"]["model"].clone();
    let (s, v) = a.call("PUT", "/api/model", Some(1), Some(json!({ "model": model }))).await;
    assert_eq!(s, StatusCode::OK, "{v}");

    // a model that drops annotated features is refused
    let (s, v) = a.call("PUT", "/api/model", Some(2), Some(json!({"afm": "App : ;\n"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (s, _) = a.call("PUT", "/api/model", Some(2), Some(json!({"afm": "App : [\n"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let mut colors = c["data"].clone();
    colors["f_CHN"] = json!("#123456");
    let (s, v) = a.call("PUT", "/api/colors", Some(2), Some(colors)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(a.root.join("color.json")).unwrap()).unwrap();
    assert_eq!(saved["f_CHN"], "#123456");
    let (s, _) = a.call("PUT", "/api/colors", Some(3), Some(json!({"App": "red"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn files_and_annotation_cycle() {
    let a = api("offline");
    let files = a.get("/api/files").await;
    assert_eq!(files["data"][0]["path"], "src/Sync.java");
    assert_eq!(files["data"][0]["dangling"], 0);

    let f = a.get("/api/file?path=src/Sync.java").await;
    let text = f["data"]["text"].as_str().unwrap().to_string();
    let before = f["data"]["annotations"].as_array().unwrap().len();
    assert!(before > 0);
    assert!(f["data"]["annotations"][0]["origin"].is_string());

    let start = text.find("void upload").unwrap();
    let end = start + text[start..].find('}').unwrap() + 1;
    let body = json!({"path": "src/Sync.java", "start": start, "end": end, "feature": "online"});

    // writes need a version, and the current one
    let (s, _) = a.call("POST", "/api/annotate", None, Some(body.clone())).await;
    assert_eq!(s, StatusCode::PRECONDITION_REQUIRED);
    let (s, v) = a.call("POST", "/api/annotate", Some(0), Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["project_version"], 1);
    assert_eq!(v["data"]["added"][0]["start"], start);
    assert_eq!(v["data"]["annotations"].as_array().unwrap().len(), before + 1);
    let (s, v) = a.call("POST", "/api/annotate", Some(0), Some(body.clone())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["project_version"], 1);

    // refetch shows the record at the same offsets
    let f = a.get("/api/file?path=src/Sync.java").await;
    assert_eq!(f["project_version"], 1);
    assert!(f["data"]["annotations"].as_array().unwrap().iter().any(|r| r["start"] == start && r["end"] == end && r["feature"] == "online"));
    assert!(std::fs::read_to_string(a.root.join("src/Sync.color")).unwrap().contains(&format!("start=\"{start}\"")));

    let (s, v) = a.call("DELETE", "/api/annotate", Some(1), Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["data"]["removed"], 1);
    let (s, _) = a.call("DELETE", "/api/annotate", Some(2), Some(body)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, _) = a.call("POST", "/api/annotate", Some(2), Some(json!({"path": "src/Sync.java", "start": 0, "end": 5, "feature": "nope"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = a.call("GET", "/api/file?path=src/Missing.java", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, v) = a.call("POST", "/api/annotate", Some(2), Some(json!({"path": 3}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
}

#[tokio::test]
async fn propagate_endpoint() {
    let a = api("stack-methods");
    let (s, v) = a.call("POST", "/api/propagate", Some(0), Some(json!({"threshold": 0.5}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["data"]["params"]["threshold"], 0.5);
    assert_eq!(v["data"]["params"]["min_neighbors"], 2);
    assert!(v["data"]["converged"].as_bool().unwrap());
    let (s, _) = a.call("POST", "/api/propagate", Some(1), Some(json!({"threshold": 1.5}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(a.get("/api/model").await["project_version"], 1);
}

#[tokio::test]
async fn interactions_and_accept() {
    let a = api("languages");
    let v = a.get("/api/interactions").await;
    let ids: Vec<&str> = v["data"]["suggestions"].as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"mutual_exclude:f_CHN:f_GBR"), "{ids:?}");
    assert_eq!(v["data"]["constraints"]["additions"][0]["formula"], "not (f_CHN and f_GBR)");

    let (s, v) = a.call("POST", "/api/constraints/accept", Some(0), Some(json!(["mutual_exclude:f_CHN:f_GBR"]))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["data"]["configurations"], 3);
    let v = a.get("/api/interactions").await;
    assert_eq!(v["data"]["constraints"]["entailed"], json!(["mutual_exclude:f_CHN:f_GBR"]));
    let (s, _) = a.call("POST", "/api/constraints/accept", Some(1), Some(json!(["bogus"]))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn configuration_and_variants() {
    let a = api("stack");
    let all = json!({"Stack": true, "push": true, "pop": true, "lock": true});
    let nolock = json!({"Stack": true, "push": true, "pop": true, "lock": false});

    let v = a.get("/api/model").await;
    assert_eq!(v["project_version"], 0);
    let (s, v) = a.call("POST", "/api/configuration/validate", None, Some(all.clone())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["data"]["valid"], true);
    let (_, v) = a.call("POST", "/api/configuration/validate", None, Some(json!({"Stack": false, "push": true, "pop": true, "lock": true}))).await;
    assert_eq!(v["data"]["valid"], false);
    assert_eq!(v["data"]["violations"].as_array().unwrap().len(), 4);
    let (s, _) = a.call("POST", "/api/configuration/validate", None, Some(json!({"Stack": true}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, v) = a.call("POST", "/api/variant/preview", None, Some(all.clone())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["data"]["removals"], json!({}));
    let (_, v) = a.call("POST", "/api/variant/preview", None, Some(nolock.clone())).await;
    let ranges = v["data"]["removals"]["src/Stack.java"].as_array().unwrap();
    let text = std::fs::read_to_string(a.root.join("src/Stack.java")).unwrap();
    let cut: Vec<&str> = ranges.iter().map(|r| &text[r["start"].as_u64().unwrap() as usize..r["end"].as_u64().unwrap() as usize]).collect();
    assert!(cut.iter().any(|c| c.starts_with("Lock lock()")), "{cut:?}");
    assert!(!v["data"]["warnings"].as_array().unwrap().is_empty());
    let (s, v) = a.call("POST", "/api/variant/preview", None, Some(json!({"Stack": false, "push": false, "pop": false, "lock": false}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["details"].is_array());

    let (s, v) = a.call("POST", "/api/variant/extract", None, Some(json!({"configuration": all, "out_dir": "variants/all"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(std::fs::read_to_string(a.root.join("variants/all/src/Stack.java")).unwrap(), text);
    let (s, _) = a.call("POST", "/api/variant/extract", None, Some(json!({"configuration": nolock, "out_dir": "."}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(std::fs::read_to_string(a.root.join("src/Stack.java")).unwrap(), text);
    // none of these were project writes
    assert_eq!(a.get("/api/files").await["project_version"], 0);
}

#[tokio::test]
async fn concurrent_writers_serialize() {
    let a = Arc::new(api("offline"));
    let text = a.get("/api/file?path=src/Sync.java").await["data"]["text"].as_str().unwrap().to_string();
    let start = text.find("void upload").unwrap();
    let end = start + text[start..].find('}').unwrap() + 1;
    let mut tasks = Vec::new();
    for _ in 0..8 {
        let a = a.clone();
        tasks.push(tokio::spawn(async move {
            a.call("POST", "/api/annotate", Some(0), Some(json!({"path": "src/Sync.java", "start": start, "end": end, "feature": "online"}))).await.0
        }));
    }
    let mut codes = Vec::new();
    for t in tasks {
        codes.push(t.await.unwrap());
    }
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::OK).count(), 1, "{codes:?}");
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::CONFLICT).count(), 7);
}
