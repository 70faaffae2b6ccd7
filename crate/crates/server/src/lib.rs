//! Annotation service: leases tasks to annotators, stores their verdicts,
//! serves clip previews, and exposes selective rates and the retrieval export.

use std::collections::HashMap;
use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use clipcurate::annotation::{
    create_tasks, export_retrieval_dataset, instructions, AnnotationError, ClipCandidates, Submission, SubmitOutcome,
    TaskStore, DEFAULT_LEASE_TTL_MS,
};
use clipcurate::catalog::{scan, ManifestRecord};
use clipcurate::model::{AnnotationMode, AnnotationTask, ClipId, ClipRecord, RgbFrame, MAX_PAGE_SIZE};
use clipcurate::pipeline::{discover_sources, load_sources, read_candidates, read_clips, Source, MANIFEST_FILE};
use clipcurate::select::selective_rates;

pub mod form;

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0))
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub mode: AnnotationMode,
    pub page_size: usize,
    pub annotators_per_task: usize,
    pub lease_ttl_ms: u64,
    /// Seeds caption shuffling.
    pub seed: u64,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            mode: AnnotationMode::BestCaption,
            page_size: MAX_PAGE_SIZE,
            annotators_per_task: 1,
            lease_ttl_ms: DEFAULT_LEASE_TTL_MS,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Pipeline(#[from] clipcurate::pipeline::PipelineError),
    #[error(transparent)]
    Catalog(#[from] clipcurate::catalog::CatalogError),
    #[error("job has no captioned clips")]
    NothingToAnnotate,
}

pub struct ServiceState {
    pub store: TaskStore,
    pub opts: ServiceOptions,
    pub clips: HashMap<ClipId, ClipCandidates>,
    pub records: HashMap<ClipId, ClipRecord>,
    pub sources: HashMap<String, Arc<Source>>,
    pub manifest: Vec<ManifestRecord>,
    pub roster: Vec<String>,
    pub clock: Clock,
}

impl ServiceState {
    pub fn new(
        candidates: Vec<ClipCandidates>,
        records: Vec<ClipRecord>,
        sources: Vec<Source>,
        manifest: Vec<ManifestRecord>,
        roster: Vec<String>,
        opts: ServiceOptions,
        clock: Clock,
    ) -> Result<Self, ServeError> {
        let tasks = create_tasks(&candidates, opts.mode, opts.page_size, opts.seed)?;
        Ok(Self {
            store: TaskStore::new(tasks, opts.annotators_per_task),
            opts,
            clips: candidates.into_iter().map(|c| (c.clip_id.clone(), c)).collect(),
            records: records.into_iter().map(|r| (r.clip_id.clone(), r)).collect(),
            sources: sources.into_iter().map(|s| (s.id().as_str().to_owned(), Arc::new(s))).collect(),
            manifest,
            roster,
            clock,
        })
    }

    /// Loads a finished (or captioned) job directory plus its source media.
    pub fn from_job(
        job_dir: &Path,
        inputs: &[std::path::PathBuf],
        roster: Vec<String>,
        opts: ServiceOptions,
        clock: Clock,
    ) -> Result<Self, ServeError> {
        let candidates: Vec<ClipCandidates> = read_candidates(job_dir)?
            .into_iter()
            .filter(|r| !r.candidates.is_empty())
            .map(|r| ClipCandidates { clip_id: r.clip_id, candidates: r.candidates })
            .collect();
        if candidates.is_empty() {
            return Err(ServeError::NothingToAnnotate);
        }
        let sources = load_sources(&discover_sources(inputs)?)?;
        let manifest = scan(&job_dir.join(MANIFEST_FILE))?;
        Self::new(candidates, read_clips(job_dir)?, sources, manifest, roster, opts, clock)
    }
}

/// A caption as the page shows it. Teacher identity stays hidden.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShownCaption {
    pub position: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub clip_id: ClipId,
    pub mode: AnnotationMode,
    pub instructions: String,
    pub captions: Vec<ShownCaption>,
    pub media_url: String,
    pub lease_expires_at_ms: u64,
}

fn task_view(state: &ServiceState, task: &AnnotationTask) -> TaskView {
    let clip = &state.clips[&task.clip_id];
    TaskView {
        task_id: task.task_id.clone(),
        clip_id: task.clip_id.clone(),
        mode: task.mode,
        instructions: instructions(task.mode).to_owned(),
        captions: task
            .caption_order
            .iter()
            .enumerate()
            .map(|(position, &i)| ShownCaption { position, text: clip.candidates[i].text.clone() })
            .collect(),
        media_url: format!("/clips/{}/media", task.clip_id),
        lease_expires_at_ms: task.lease.as_ref().map(|l| l.expires_at_ms).unwrap_or(0),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

struct ApiError(StatusCode, &'static str, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1.to_owned(), message: self.2 })).into_response()
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let (status, code) = match &e {
            AnnotationError::PoolExhausted => (StatusCode::NOT_FOUND, "pool_exhausted"),
            AnnotationError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
            AnnotationError::StaleLease(_) => (StatusCode::CONFLICT, "stale_lease"),
            AnnotationError::ConflictingResubmit(_) => (StatusCode::CONFLICT, "conflicting_resubmit"),
            AnnotationError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_selection"),
            AnnotationError::Empty | AnnotationError::NoOverlap => (StatusCode::NOT_FOUND, "empty"),
            AnnotationError::Fraction(_) => (StatusCode::BAD_REQUEST, "bad_fraction"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError(status, code, e.to_string())
    }
}

type Shared = Arc<ServiceState>;

#[derive(Deserialize)]
struct LeaseQuery {
    annotator: Option<String>,
}

async fn lease(State(s): State<Shared>, Query(q): Query<LeaseQuery>) -> Result<Json<TaskView>, ApiError> {
    let annotator = q.annotator.filter(|a| !a.trim().is_empty()).ok_or_else(|| {
        ApiError(StatusCode::BAD_REQUEST, "missing_annotator", "annotator query parameter is required".into())
    })?;
    let task = s.store.lease(&annotator, s.opts.lease_ttl_ms, (s.clock)())?;
    Ok(Json(task_view(&s, &task)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitReply {
    pub outcome: SubmitOutcome,
}

async fn submit(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(sub): Json<Submission>,
) -> Result<Json<SubmitReply>, ApiError> {
    let outcome = s.store.submit(&id, &sub, (s.clock)())?;
    Ok(Json(SubmitReply { outcome }))
}

#[derive(Deserialize)]
struct MediaQuery {
    /// Whole second within the clip; the full strip when absent.
    second: Option<usize>,
}

fn png(frame: &RgbFrame) -> Result<Vec<u8>, ApiError> {
    let img = image::RgbImage::from_raw(frame.width, frame.height, frame.data.clone())
        .ok_or_else(|| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "internal", "frame size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    Ok(out.into_inner())
}

/// Per-second keyframes side by side, left to right.
pub fn keyframe_strip(frames: &[RgbFrame]) -> RgbFrame {
    let w: u32 = frames.iter().map(|f| f.width).sum();
    let h = frames.iter().map(|f| f.height).max().unwrap_or(0);
    let mut data = vec![0u8; w as usize * h as usize * 3];
    let mut x0 = 0usize;
    for f in frames {
        for y in 0..f.height as usize {
            let src = &f.data[y * f.width as usize * 3..(y + 1) * f.width as usize * 3];
            let at = (y * w as usize + x0) * 3;
            data[at..at + src.len()].copy_from_slice(src);
        }
        x0 += f.width as usize;
    }
    RgbFrame::new(w, h, data)
}

async fn media(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<MediaQuery>,
) -> Result<Response, ApiError> {
    let clip_id = ClipId(id);
    let not_found = || ApiError(StatusCode::NOT_FOUND, "unknown_clip", format!("no media for clip {clip_id}"));
    let rec = s.records.get(&clip_id).ok_or_else(not_found)?;
    let src = s.sources.get(rec.source_id.as_str()).ok_or_else(not_found)?.clone();
    let (start, end) = (rec.start_frame, rec.end_frame);
    let frames = tokio::task::spawn_blocking(move || src.frames.per_second_keyframes(start, end))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "decode_failed", e.to_string()))?;
    let frames: Vec<RgbFrame> = frames.into_iter().map(|k| k.frame).collect();
    let image = match q.second {
        Some(k) => frames.get(k).cloned().ok_or_else(|| {
            ApiError(StatusCode::NOT_FOUND, "no_such_second", format!("clip has {} seconds", frames.len()))
        })?,
        None => keyframe_strip(&frames),
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], png(&image)?).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub teacher_id: String,
    pub rate: f64,
}

async fn rates(State(s): State<Shared>) -> Result<Json<Vec<RateRow>>, ApiError> {
    let r = selective_rates(s.manifest.iter().map(|m| m.teacher_id.as_str()), &s.roster)
        .map_err(|e| ApiError(StatusCode::NOT_FOUND, "empty", e.to_string()))?;
    Ok(Json(r.into_iter().map(|(teacher_id, rate)| RateRow { teacher_id, rate }).collect()))
}

#[derive(Deserialize)]
struct ExportQuery {
    train_fraction: Option<f64>,
    seed: Option<u64>,
}

async fn export(
    State(s): State<Shared>,
    Query(q): Query<ExportQuery>,
) -> Result<Json<clipcurate::annotation::RetrievalSplit>, ApiError> {
    let clips: Vec<ClipCandidates> = s.clips.values().cloned().collect();
    let split =
        export_retrieval_dataset(&s.store.answered(), &clips, q.train_fraction.unwrap_or(0.98), q.seed.unwrap_or(0))?;
    Ok(Json(split))
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/tasks/lease", get(lease))
        .route("/tasks/{id}/result", post(submit))
        .route("/clips/{id}/media", get(media))
        .route("/stats/selective-rates", get(rates))
        .route("/export/retrieval", get(export))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    log::info!("annotation service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
