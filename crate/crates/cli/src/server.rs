//! JSON HTTP API over one project.
//!
//! Reads are served lock-free from an immutable [`Snapshot`]; writes are
//! serialized by a mutex, applied to a copy, persisted, and then published
//! as the next snapshot. Every response is `{"project_version": n, ...}`
//! with either `data` or `error`. Writes must send the version they last
//! saw in an `If-Match` header; a stale version gets 409.
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use arc_swap::ArcSwap;
use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;

use featurekit::annotation::{AnnotationRecord, ColorMap, Origin};
use featurekit::interaction::accept;
use featurekit::java::Span;
use featurekit::location::{propagate, PropagationParams};
use featurekit::model::{count_configurations_with, parse_afm, serialize_afm, validate_configuration, Configuration, FeatureModel};
use featurekit::project::Project;
use featurekit::variant::{apply_variant, build_variant, check_variant_references, plan_variant, VariantError};
use featurekit::Execution;

use crate::commands::{check_out_dir, interaction_report};

pub const VERSION_HEADER: &str = "if-match";

#[derive(Debug)]
pub struct Snapshot {
    pub version: u64,
    pub project: Project,
}

pub struct AppState {
    snapshot: ArcSwap<Snapshot>,
    write: Mutex<()>,
    exec: Execution,
}

impl AppState {
    pub fn new(project: Project, exec: Execution) -> Self {
        AppState { snapshot: ArcSwap::from_pointee(Snapshot { version: 0, project }), write: Mutex::new(()), exec }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.load_full()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    details: Option<Value>,
    version: u64,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        ApiError { status, message: message.to_string(), details: None, version: 0 }
    }

    fn at(mut self, version: u64) -> Self {
        self.version = version;
        self
    }
}

fn bad_request(e: impl ToString) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, e)
}

fn unprocessable(e: impl ToString) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e)
}

fn not_found(e: impl ToString) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, e)
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    log::error!("{e}");
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}"))
}

impl From<VariantError> for ApiError {
    fn from(e: VariantError) -> Self {
        match e {
            VariantError::InvalidConfiguration(ref v) => {
                let details = serde_json::to_value(v).ok();
                ApiError { details, ..unprocessable(&e) }
            }
            VariantError::Model(_) | VariantError::Dangling { .. } => unprocessable(e),
            _ => internal(e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "project_version": self.version, "error": self.message });
        if let Some(d) = self.details {
            body["details"] = d;
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok(version: u64, data: impl Serialize) -> ApiResult {
    let data = serde_json::to_value(data).map_err(internal)?;
    Ok(Json(json!({ "project_version": version, "data": data })).into_response())
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(internal)?
}

fn expected_version(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers
        .get(VERSION_HEADER)
        .ok_or_else(|| ApiError::new(StatusCode::PRECONDITION_REQUIRED, "missing If-Match project version"))?;
    raw.to_str().ok().map(|s| s.trim().trim_matches('"')).and_then(|s| s.parse().ok()).ok_or_else(|| bad_request("If-Match must be a project version number"))
}

/// Apply `f` to a copy of the current project and publish the result.
/// `f` persists its own changes; on error nothing is published.
async fn write<T, F>(state: &AppState, headers: &HeaderMap, f: F) -> ApiResult
where
    T: Serialize + Send + 'static,
    F: FnOnce(&mut Project, Execution) -> Result<T, ApiError> + Send + 'static,
{
    let expected = expected_version(headers).map_err(|e| e.at(state.snapshot().version))?;
    let _guard = state.write.lock().await;
    let current = state.snapshot();
    if expected != current.version {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("project changed: version {} (you sent {expected})", current.version)).at(current.version));
    }
    let exec = state.exec;
    let mut project = current.project.clone();
    let (project, data) = blocking(move || f(&mut project, exec).map(|d| (project, d))).await.map_err(|e| e.at(current.version))?;
    let version = current.version + 1;
    state.snapshot.store(Arc::new(Snapshot { version, project }));
    ok(version, data)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/model", get(get_model).put(put_model))
        .route("/api/colors", get(get_colors).put(put_colors))
        .route("/api/files", get(get_files))
        .route("/api/file", get(get_file))
        .route("/api/annotate", post(post_annotate).delete(delete_annotate))
        .route("/api/propagate", post(post_propagate))
        .route("/api/interactions", get(get_interactions))
        .route("/api/constraints/accept", post(post_accept))
        .route("/api/configuration/validate", post(post_validate))
        .route("/api/variant/preview", post(post_preview))
        .route("/api/variant/extract", post(post_extract))
        .with_state(state)
}

pub async fn serve(root: PathBuf, addr: &str, exec: Execution) -> anyhow::Result<()> {
    let project = Project::load(&root, exec).with_context(|| format!("loading project {}", root.display()))?;
    let app = router(Arc::new(AppState::new(project, exec)));
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    eprintln!("serving {} on http://{}", root.display(), listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn model_view(model: &FeatureModel, exec: Execution) -> Value {
    json!({
        "model": model,
        "afm": serialize_afm(model),
        "features": model.features(),
        "configurations": count_configurations_with(model, exec).ok(),
    })
}

async fn get_model(State(s): State<Arc<AppState>>) -> ApiResult {
    let snap = s.snapshot();
    let exec = s.exec;
    let v = snap.version;
    let data = blocking(move || Ok(model_view(&snap.project.model, exec))).await?;
    ok(v, data)
}

/// Either `{"afm": "<text>"}` or the JSON form returned by GET.
fn model_from_body(body: &Value) -> Result<FeatureModel, ApiError> {
    if let Some(text) = body.get("afm").and_then(Value::as_str) {
        return parse_afm(text).map_err(unprocessable);
    }
    let m = body.get("model").unwrap_or(body);
    serde_json::from_value(m.clone()).map_err(unprocessable)
}

async fn put_model(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let model = model_from_body(&parse::<Value>(&body)?)?;
    write(&s, &headers, move |p, exec| {
        let unknown = p.annotations.unknown_features(&model);
        if !unknown.is_empty() {
            let list: Vec<String> = unknown.into_iter().collect();
            return Err(unprocessable(format!("annotations use features missing from the new model: {}", list.join(", "))));
        }
        p.model = model;
        p.save_model().map_err(internal)?;
        Ok(model_view(&p.model, exec))
    })
    .await
}

async fn get_colors(State(s): State<Arc<AppState>>) -> ApiResult {
    let snap = s.snapshot();
    let colors = snap.project.effective_colors().map_err(internal)?;
    ok(snap.version, colors)
}

async fn put_colors(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let colors: ColorMap = parse(&body)?;
    write(&s, &headers, move |p, _| {
        let problems = colors.problems(&p.model);
        if !problems.is_empty() {
            return Err(unprocessable(problems.join("; ")));
        }
        p.colors = Some(colors);
        p.save_colors().map_err(internal)?;
        Ok(p.colors.clone())
    })
    .await
}

#[derive(Serialize)]
struct FileSummary<'a> {
    path: &'a str,
    records: usize,
    dangling: usize,
}

async fn get_files(State(s): State<Arc<AppState>>) -> ApiResult {
    let snap = s.snapshot();
    let p = &snap.project;
    let files: Vec<FileSummary> = p
        .trees()
        .map(|t| FileSummary {
            path: &t.path,
            records: p.annotations.records(&t.path).len(),
            dangling: p.annotations.file(&t.path).map_or(0, |f| f.dangling_count()),
        })
        .collect();
    ok(snap.version, files)
}

#[derive(Deserialize)]
struct FileQuery {
    path: String,
}

#[derive(Serialize)]
struct FilePayload<'a> {
    path: &'a str,
    text: &'a str,
    annotations: &'a [AnnotationRecord],
    dangling: usize,
}

async fn get_file(State(s): State<Arc<AppState>>, Query(q): Query<FileQuery>) -> ApiResult {
    let snap = s.snapshot();
    let p = &snap.project;
    let tree = p.tree(&q.path).ok_or_else(|| not_found(format!("no source {}", q.path)).at(snap.version))?;
    ok(
        snap.version,
        FilePayload {
            path: &tree.path,
            text: &tree.text,
            annotations: p.annotations.records(&tree.path),
            dangling: p.annotations.file(&tree.path).map_or(0, |f| f.dangling_count()),
        },
    )
}

#[derive(Deserialize)]
struct AnnotateRequest {
    path: String,
    start: usize,
    end: usize,
    feature: String,
}

async fn post_annotate(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: AnnotateRequest = parse(&body)?;
    write(&s, &headers, move |p, _| {
        let tree = p.index.tree(&req.path).ok_or_else(|| not_found(format!("no source {}", req.path)))?;
        let added = p.annotations.annotate_range(tree, &p.model, req.start, req.end, &req.feature, Origin::Manual).map_err(unprocessable)?;
        p.save_annotations().map_err(internal)?;
        Ok(json!({ "added": added, "annotations": p.annotations.records(&req.path) }))
    })
    .await
}

async fn delete_annotate(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: AnnotateRequest = parse(&body)?;
    write(&s, &headers, move |p, _| {
        let removed = p.annotations.remove(&req.path, Span::new(req.start, req.end), &req.feature);
        if removed == 0 {
            return Err(not_found(format!("no `{}` record at {}:{}..{}", req.feature, req.path, req.start, req.end)));
        }
        p.save_annotations().map_err(internal)?;
        Ok(json!({ "removed": removed, "annotations": p.annotations.records(&req.path) }))
    })
    .await
}

#[derive(Deserialize)]
#[serde(default)]
struct ParamsBody {
    threshold: f64,
    min_neighbors: usize,
    max_rounds: usize,
}

impl Default for ParamsBody {
    fn default() -> Self {
        let d = PropagationParams::default();
        ParamsBody { threshold: d.threshold, min_neighbors: d.min_neighbors, max_rounds: d.max_rounds }
    }
}

async fn post_propagate(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let b: ParamsBody = if body.is_empty() { ParamsBody::default() } else { parse(&body)? };
    let params = PropagationParams { threshold: b.threshold, min_neighbors: b.min_neighbors, max_rounds: b.max_rounds };
    write(&s, &headers, move |p, exec| {
        let report = propagate(&p.index, &mut p.annotations, &params, exec).map_err(unprocessable)?;
        p.save_annotations().map_err(internal)?;
        Ok(report)
    })
    .await
}

async fn get_interactions(State(s): State<Arc<AppState>>) -> ApiResult {
    let snap = s.snapshot();
    let exec = s.exec;
    let v = snap.version;
    let report = blocking(move || interaction_report(&snap.project, exec).map_err(unprocessable)).await?;
    ok(v, report)
}

async fn post_accept(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let ids: Vec<String> = parse(&body)?;
    write(&s, &headers, move |p, exec| {
        let report = interaction_report(p, exec).map_err(unprocessable)?;
        p.model = accept(&p.model, &report.suggestions, &ids).map_err(unprocessable)?;
        p.save_model().map_err(internal)?;
        Ok(model_view(&p.model, exec))
    })
    .await
}

async fn post_validate(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let config: Configuration = parse(&body)?;
    let snap = s.snapshot();
    let v = validate_configuration(&snap.project.model, &config).map_err(|e| unprocessable(e).at(snap.version))?;
    ok(snap.version, json!({ "valid": v.is_valid(), "violations": v.violations }))
}

#[derive(Serialize)]
struct Range {
    start: usize,
    end: usize,
}

async fn post_preview(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let config: Configuration = parse(&body)?;
    let snap = s.snapshot();
    let exec = s.exec;
    let v = snap.version;
    let data = blocking(move || {
        let p = &snap.project;
        let plan = plan_variant(p.trees(), &p.annotations, &p.model, &config)?;
        let variant = build_variant(p.index.trees(), &plan, exec)?;
        let warnings = check_variant_references(&p.index, &variant)?;
        let removals: BTreeMap<&String, Vec<Range>> = plan
            .files
            .iter()
            .filter(|(_, f)| !f.removals.is_empty())
            .map(|(k, f)| (k, f.removals.iter().map(|s| Range { start: s.start, end: s.end }).collect()))
            .collect();
        Ok(json!({ "removals": removals, "dropped_files": plan.dropped_files, "warnings": warnings }))
    })
    .await
    .map_err(|e| e.at(v))?;
    ok(v, data)
}

#[derive(Deserialize)]
struct ExtractRequest {
    configuration: Configuration,
    out_dir: PathBuf,
}

async fn post_extract(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: ExtractRequest = parse(&body)?;
    let snap = s.snapshot();
    let exec = s.exec;
    let v = snap.version;
    let data = blocking(move || {
        let p = &snap.project;
        let out = if req.out_dir.is_absolute() { req.out_dir.clone() } else { p.root.join(&req.out_dir) };
        check_out_dir(&p.root, &out).map_err(unprocessable)?;
        let plan = plan_variant(p.trees(), &p.annotations, &p.model, &req.configuration)?;
        let (_, manifest) = apply_variant(&p.index, &plan, &out, exec)?;
        Ok(json!({ "out_dir": out, "manifest": manifest }))
    })
    .await
    .map_err(|e| e.at(v))?;
    ok(v, data)
}
