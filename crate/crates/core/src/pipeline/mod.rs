//! Split, caption and select over a set of sources, with per-source
//! checkpoints so an interrupted job resumes where it stopped.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{read_jsonl, CatalogError, JobCheckpoint, JsonlWriter, Manifest, ManifestRecord, Stage};
use crate::corpus::{meta_path, SourceMeta};
use crate::fanout::{fanout, ClipPayload, FanoutError, PromptTemplate, TeacherFailure};
use crate::gateway::{BackendClient, BackendError, HealthStatus};
use crate::ingest::{FrameDescriptor, FrameSource, IngestError};
use crate::model::{CaptionCandidate, ClipId, ClipRecord, ClipState, SourceId, SourceVideo};
use crate::select::{gate, select_best, SelectError};
use crate::splitter::{split_source, SplitError};

mod config;

pub use config::{ConfigError, PipelineConfig, DEFAULT_TEACHER_COUNT};

pub const CLIPS_FILE: &str = "clips.jsonl";
pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const PARKED_FILE: &str = "parked.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("{path}: {source}")]
    Ingest { path: PathBuf, source: IngestError },
    #[error("{path}: bad sidecar: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("splitting {source_id} failed: {source}")]
    Split { source_id: SourceId, source: SplitError },
    #[error("captioning clip {clip}: {source}")]
    Fanout { clip: ClipId, source: FanoutError },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("backends failed health checks: {0:?}")]
    Unhealthy(Vec<(String, HealthStatus)>),
    #[error("no sources given")]
    NoSources,
    #[error("two inputs decode to the same source {0}")]
    DuplicateSource(SourceId),
    #[error("source {source_id} has not finished stage {stage:?}")]
    MissingStage { source_id: SourceId, stage: Stage },
    #[error("simulated crash in stage {stage:?} after {after_sources} sources")]
    Killed { stage: Stage, after_sources: usize },
}

/// One input: decoded frames plus the sidecar's text.
pub struct Source {
    pub path: PathBuf,
    pub frames: FrameSource,
    pub video: SourceVideo,
}

impl Source {
    pub fn id(&self) -> &SourceId {
        &self.video.id
    }
}

/// Raw containers among `inputs`; directories are expanded one level.
/// The result is sorted so job order never depends on directory listing.
pub fn discover_sources(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|e| PipelineError::Ingest {
                path: p.clone(),
                source: IngestError::Unreadable { path: p.clone(), source: e },
            })?;
            for e in entries.flatten() {
                let path = e.path();
                if path.extension().is_some_and(|x| x == "rvc") {
                    out.push(path);
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(PipelineError::NoSources);
    }
    Ok(out)
}

pub fn load_source(path: &Path) -> Result<Source, PipelineError> {
    let frames = FrameSource::open(&FrameDescriptor::raw(path))
        .map_err(|source| PipelineError::Ingest { path: path.into(), source })?;
    let sidecar = meta_path(path);
    let meta = match std::fs::read(&sidecar) {
        Ok(bytes) => serde_json::from_slice::<SourceMeta>(&bytes)
            .map_err(|e| PipelineError::Sidecar { path: sidecar.clone(), message: e.to_string() })?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            SourceMeta { title: None, description: None, subtitles: Vec::new(), layout: None }
        }
        Err(e) => return Err(PipelineError::Sidecar { path: sidecar, message: e.to_string() }),
    };
    let video = SourceVideo {
        id: frames.source_id.clone(),
        frame_count: frames.frame_count,
        fps: frames.fps,
        title: meta.title,
        description: meta.description,
        subtitles: meta.subtitles,
    };
    Ok(Source { path: path.to_owned(), frames, video })
}

pub fn load_sources(paths: &[PathBuf]) -> Result<Vec<Source>, PipelineError> {
    let sources: Vec<Source> = paths.iter().map(|p| load_source(p)).collect::<Result<_, _>>()?;
    let mut seen = HashSet::new();
    for s in &sources {
        if !seen.insert(s.id().clone()) {
            return Err(PipelineError::DuplicateSource(s.id().clone()));
        }
    }
    Ok(sources)
}

/// Connected clients for every configured backend.
pub struct Backends {
    pub embed: BackendClient,
    pub score: BackendClient,
    pub teachers: HashMap<String, BackendClient>,
}

impl Backends {
    pub fn connect(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let mut all = HashMap::new();
        for d in &cfg.backends {
            all.insert(d.backend_id.clone(), BackendClient::connect(d.clone())?);
        }
        let teachers = cfg.roster.iter().map(|t| (t.backend_id.clone(), all[&t.backend_id].clone())).collect();
        Ok(Self { embed: all[&cfg.embed_backend].clone(), score: all[&cfg.score_backend].clone(), teachers })
    }

    pub fn health(&self) -> Vec<(String, HealthStatus)> {
        let mut out: Vec<(String, HealthStatus)> = std::iter::once(&self.embed)
            .chain(std::iter::once(&self.score))
            .chain(self.teachers.values())
            .map(|c| (c.id().to_owned(), c.health_check()))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    pub fn require_healthy(&self) -> Result<(), PipelineError> {
        let bad: Vec<_> =
            self.health().into_iter().filter(|(_, h)| !matches!(h, HealthStatus::Healthy { .. })).collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Unhealthy(bad))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub clip_id: ClipId,
    pub source_id: SourceId,
    pub image_frame: u32,
    pub candidates: Vec<CaptionCandidate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<TeacherFailure>,
}

/// A clip set aside because a stage could not produce output for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParkedRecord {
    pub clip_id: ClipId,
    pub source_id: SourceId,
    pub stage: Stage,
    pub reason: String,
}

/// Where to simulate a crash. `after_sources = 0` stops right at the stage
/// boundary; `n > 0` stops after the n-th source's output is written but
/// before the checkpoint records it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KillPoint {
    pub stage: Stage,
    pub after_sources: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub kill: Option<KillPoint>,
    /// Sources processed concurrently; 0 means available cores.
    pub workers: usize,
    /// Skip backend health checks.
    pub skip_health: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub job_id: String,
    pub sources: usize,
    pub clips: usize,
    pub kept: usize,
    pub dropped: BTreeMap<String, usize>,
    pub captioned: usize,
    pub teacher_failures: usize,
    pub manifest_records: usize,
    pub parked: usize,
    pub strong_fraction: Option<f64>,
    pub stage: Stage,
    /// The job had already finished; nothing ran.
    pub noop: bool,
}

pub fn clip_outcome(state: ClipState) -> String {
    match state {
        ClipState::Dropped(r) => r.to_string(),
        other => format!("{other:?}").to_lowercase(),
    }
}

/// Reads a job's stage outputs, keeping the first record per clip_id.
fn read_unique<T, F>(path: &Path, key: F) -> Result<Vec<T>, CatalogError>
where
    T: serde::de::DeserializeOwned,
    F: Fn(&T) -> &ClipId,
{
    let mut seen = HashSet::new();
    Ok(read_jsonl::<T>(path)?.into_iter().filter(|r| seen.insert(key(r).clone())).collect())
}

pub fn read_clips(dir: &Path) -> Result<Vec<ClipRecord>, CatalogError> {
    read_unique(&dir.join(CLIPS_FILE), |c: &ClipRecord| &c.clip_id)
}

pub fn read_candidates(dir: &Path) -> Result<Vec<CandidateRecord>, CatalogError> {
    read_unique(&dir.join(CANDIDATES_FILE), |c: &CandidateRecord| &c.clip_id)
}

pub fn read_parked(dir: &Path) -> Result<Vec<ParkedRecord>, CatalogError> {
    read_jsonl(&dir.join(PARKED_FILE))
}

pub fn summarize(
    dir: &Path,
    job_id: &str,
    sources: usize,
    stage: Stage,
    noop: bool,
) -> Result<RunSummary, CatalogError> {
    let clips = read_clips(dir)?;
    let candidates = read_candidates(dir)?;
    let manifest = crate::catalog::scan(&dir.join(MANIFEST_FILE))?;
    let mut dropped = BTreeMap::new();
    for c in clips.iter().filter(|c| c.state.is_dropped()) {
        *dropped.entry(clip_outcome(c.state)).or_insert(0) += 1;
    }
    let strong = manifest.iter().filter(|r| r.gate == crate::select::Gate::Strong).count();
    Ok(RunSummary {
        job_id: job_id.to_owned(),
        sources,
        clips: clips.len(),
        kept: clips.iter().filter(|c| c.state == ClipState::Kept).count(),
        dropped,
        captioned: candidates.len(),
        teacher_failures: candidates.iter().map(|c| c.failures.len()).sum(),
        manifest_records: manifest.len(),
        parked: read_parked(dir)?.len(),
        strong_fraction: (!manifest.is_empty()).then(|| strong as f64 / manifest.len() as f64),
        stage,
        noop,
    })
}

/// Output of one source in one stage.
enum Produced {
    Clips(Vec<ClipRecord>),
    Captions(Vec<CandidateRecord>, Vec<ParkedRecord>),
    Selections(Vec<ManifestRecord>, Vec<ParkedRecord>),
}

struct Job<'a> {
    cfg: &'a PipelineConfig,
    dir: &'a Path,
    backends: &'a Backends,
    template: PromptTemplate,
    cp: JobCheckpoint,
    opts: &'a RunOptions,
}

impl Job<'_> {
    fn produce(&self, stage: Stage, src: &Source, done: &HashSet<ClipId>) -> Result<Produced, PipelineError> {
        match stage {
            Stage::Split => split_source(&src.frames, &self.cfg.splitter, &self.backends.embed)
                .map(Produced::Clips)
                .map_err(|source| PipelineError::Split { source_id: src.id().clone(), source }),
            Stage::Fanout => {
                let clips = read_clips(self.dir)?;
                let mut out = Vec::new();
                let mut parked = Vec::new();
                for clip in clips.iter().filter(|c| &c.source_id == src.id() && c.state == ClipState::Kept) {
                    if done.contains(&clip.clip_id) {
                        continue;
                    }
                    match caption_clip(src, clip, self.cfg, self.backends, &self.template) {
                        Ok(rec) => out.push(rec),
                        Err(PipelineError::Fanout {
                            clip,
                            source: FanoutError::AllTeachersFailed { failures, .. },
                        }) => {
                            let reason =
                                failures.iter().map(|f| format!("{}: {}", f.teacher_id, f.reason)).collect::<Vec<_>>();
                            parked.push(ParkedRecord {
                                clip_id: clip,
                                source_id: src.id().clone(),
                                stage: Stage::Fanout,
                                reason: reason.join("; "),
                            });
                        }
                        Err(e) => return Err(e),
                    }
                }
                Ok(Produced::Captions(out, parked))
            }
            Stage::Select => {
                let clips: HashMap<ClipId, ClipRecord> =
                    read_clips(self.dir)?.into_iter().map(|c| (c.clip_id.clone(), c)).collect();
                let mut out = Vec::new();
                let mut parked = Vec::new();
                for rec in read_candidates(self.dir)?.iter().filter(|r| &r.source_id == src.id()) {
                    if done.contains(&rec.clip_id) {
                        continue;
                    }
                    let clip = &clips[&rec.clip_id];
                    match select_clip(src, clip, rec, self.cfg, &self.backends.score) {
                        Ok(m) => out.push(m),
                        Err(SelectClipError::Select(e)) => parked.push(ParkedRecord {
                            clip_id: rec.clip_id.clone(),
                            source_id: src.id().clone(),
                            stage: Stage::Select,
                            reason: e.to_string(),
                        }),
                        Err(SelectClipError::Ingest(source)) => {
                            return Err(PipelineError::Ingest { path: src.path.clone(), source })
                        }
                    }
                }
                Ok(Produced::Selections(out, parked))
            }
            Stage::Done => unreachable!("no work in the done stage"),
        }
    }

    /// Clip ids that already have output for `stage` (including parked).
    fn finished_ids(&self, stage: Stage) -> Result<HashSet<ClipId>, CatalogError> {
        let parked = read_parked(self.dir)?.into_iter().filter(|p| p.stage == stage).map(|p| p.clip_id);
        Ok(match stage {
            Stage::Split => read_clips(self.dir)?.into_iter().map(|c| c.clip_id).collect(),
            Stage::Fanout => read_candidates(self.dir)?.into_iter().map(|c| c.clip_id).chain(parked).collect(),
            Stage::Select => crate::catalog::scan(&self.dir.join(MANIFEST_FILE))?
                .into_iter()
                .map(|m| m.clip_id)
                .chain(parked)
                .collect(),
            Stage::Done => HashSet::new(),
        })
    }

    fn run_stage(&mut self, stage: Stage, sources: &[Source]) -> Result<(), PipelineError> {
        let prev = match stage {
            Stage::Fanout => Some(Stage::Split),
            Stage::Select => Some(Stage::Fanout),
            _ => None,
        };
        if let Some(prev) = prev {
            if let Some(s) = sources.iter().find(|s| !self.cp.done(s.id(), prev)) {
                return Err(PipelineError::MissingStage { source_id: s.id().clone(), stage: prev });
            }
        }
        let pending: Vec<&Source> = sources.iter().filter(|s| !self.cp.done(s.id(), stage)).collect();
        if pending.is_empty() {
            return Ok(());
        }
        self.cp.stage = stage;
        self.cp.save(self.dir)?;
        let kill = self.opts.kill.filter(|k| k.stage == stage);
        if kill.is_some_and(|k| k.after_sources == 0) {
            return Err(PipelineError::Killed { stage, after_sources: 0 });
        }
        let done = self.finished_ids(stage)?;
        let mut clips_out = JsonlWriter::<ClipRecord>::open(&self.dir.join(CLIPS_FILE), true)?;
        let mut cand_out = JsonlWriter::<CandidateRecord>::open(&self.dir.join(CANDIDATES_FILE), true)?;
        let mut parked_out = JsonlWriter::<ParkedRecord>::open(&self.dir.join(PARKED_FILE), true)?;
        let mut manifest = Manifest::open(&self.dir.join(MANIFEST_FILE))?;
        let workers = if self.opts.workers == 0 { rayon::current_num_threads() } else { self.opts.workers };
        let mut processed = 0usize;
        for chunk in pending.chunks(workers.max(1)) {
            let produced: Vec<Result<Produced, PipelineError>> =
                chunk.par_iter().map(|s| self.produce(stage, s, &done)).collect();
            for (src, result) in chunk.iter().zip(produced) {
                match result? {
                    Produced::Clips(clips) => {
                        for c in clips.iter().filter(|c| !done.contains(&c.clip_id)) {
                            clips_out.write(c)?;
                        }
                    }
                    Produced::Captions(recs, parked) => {
                        for r in &recs {
                            cand_out.write(r)?;
                        }
                        for p in &parked {
                            parked_out.write(p)?;
                        }
                    }
                    Produced::Selections(recs, parked) => {
                        for r in &recs {
                            if !manifest.contains(&r.clip_id) {
                                manifest.append(r)?;
                            }
                        }
                        for p in &parked {
                            parked_out.write(p)?;
                        }
                    }
                }
                processed += 1;
                if kill.is_some_and(|k| k.after_sources == processed) {
                    return Err(PipelineError::Killed { stage, after_sources: processed });
                }
                self.cp.mark(src.id(), stage);
                self.cp.save(self.dir)?;
            }
        }
        Ok(())
    }
}

/// Captions one kept clip with every roster teacher.
pub fn caption_clip(
    src: &Source,
    clip: &ClipRecord,
    cfg: &PipelineConfig,
    backends: &Backends,
    template: &PromptTemplate,
) -> Result<CandidateRecord, PipelineError> {
    let payload = ClipPayload::load(&src.frames, clip, cfg.seed)
        .map_err(|source| PipelineError::Ingest { path: src.path.clone(), source })?;
    let out = fanout(&src.video, clip, &payload, &cfg.roster, &backends.teachers, template)
        .map_err(|source| PipelineError::Fanout { clip: clip.clip_id.clone(), source })?;
    Ok(CandidateRecord {
        clip_id: clip.clip_id.clone(),
        source_id: clip.source_id.clone(),
        image_frame: out.image_frame,
        candidates: out.candidates,
        failures: out.failures,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum SelectClipError {
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Scores a clip's candidates against its per-second keyframes and builds
/// the manifest line for the winner.
pub fn select_clip(
    src: &Source,
    clip: &ClipRecord,
    rec: &CandidateRecord,
    cfg: &PipelineConfig,
    scorer: &BackendClient,
) -> Result<ManifestRecord, SelectClipError> {
    let frames: Vec<_> =
        src.frames.per_second_keyframes(clip.start_frame, clip.end_frame)?.into_iter().map(|k| k.frame).collect();
    let sel = select_best(&clip.clip_id, &rec.candidates, &frames, scorer)?;
    let best = sel.best();
    Ok(ManifestRecord {
        clip_id: clip.clip_id.clone(),
        source_id: clip.source_id.clone(),
        start_frame: clip.start_frame,
        end_frame: clip.end_frame,
        fps: clip.fps,
        caption: best.candidate.text.clone(),
        teacher_id: best.candidate.teacher_id.clone(),
        matching_score: best.matching_score,
        gate: gate(best.matching_score, cfg.gate),
        inputs_used: best.candidate.inputs_used.clone(),
    })
}

/// Runs `stages` in order for every source, resuming from the job's
/// checkpoint if one exists. A changed configuration refuses to resume.
pub fn run_stages(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    dir: &Path,
    stages: &[Stage],
    opts: &RunOptions,
) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| CatalogError::Io { path: dir.to_owned(), source: e })?;
    let hash = cfg.config_hash();
    let cp = match JobCheckpoint::load(dir)? {
        Some(_) => crate::catalog::resume(dir, &cfg.job_id, &hash)?,
        None => {
            let cp = JobCheckpoint::new(&cfg.job_id, &hash);
            cp.save(dir)?;
            cp
        }
    };
    if cp.stage == Stage::Done {
        return Ok(summarize(dir, &cfg.job_id, cp.cursor.len(), Stage::Done, true)?);
    }
    let paths = discover_sources(inputs)?;
    let sources = load_sources(&paths)?;
    let backends = Backends::connect(cfg)?;
    if !opts.skip_health {
        backends.require_healthy()?;
    }
    let mut job = Job { cfg, dir, backends: &backends, template: PromptTemplate::default(), cp, opts };
    for &stage in stages.iter().filter(|s| **s != Stage::Done) {
        job.run_stage(stage, &sources)?;
    }
    if sources.iter().all(|s| job.cp.done(s.id(), Stage::Select)) {
        job.cp.stage = Stage::Done;
    }
    job.cp.save(dir)?;
    Ok(summarize(dir, &cfg.job_id, sources.len(), job.cp.stage, false)?)
}

pub fn run_all(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    dir: &Path,
    opts: &RunOptions,
) -> Result<RunSummary, PipelineError> {
    run_stages(cfg, inputs, dir, &[Stage::Split, Stage::Fanout, Stage::Select], opts)
}
