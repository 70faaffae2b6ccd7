//! Two-stage semantics-aware splitting.
//!
//! Stage one cuts a source at detected shot boundaries, chops long shots into
//! fixed-length pieces and drops pieces whose first and last features
//! disagree (transitions). Stage two stitches adjacent pieces with matching
//! boundary features, then filters by duration, motion and redundancy and
//! trims the unstable head and tail of each clip.

mod baseline;
mod metric;
mod shots;
mod stages;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baseline::{baseline_split, subtitle_clips, BaselineStrategy};
pub use metric::{max_running_distance, max_running_lpips, HistogramDistance, PerceptualDistance};
pub use shots::{content_score, detect_shots, shot_boundaries};
pub use stages::{
    artificial_cuts, consistency_filter, endpoint_embeddings, endpoint_offsets, postprocess, stitch, trimmed_interval,
};

use crate::gateway::BackendClient;
use crate::ingest::{FrameSource, IngestError};
use crate::model::{ClipId, ClipRecord, ClipState, Embedding, SourceId, StateRegression};

#[derive(Debug, thiserror::Error)]
pub enum SplitError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("frame dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("clip {0} has no endpoint embeddings")]
    MissingEmbeddings(ClipId),
    #[error("clip {0} is empty")]
    EmptyClip(ClipId),
    #[error("embedding backend failed for clip {clip}: {message}")]
    Backend { clip: ClipId, message: String },
    #[error("perceptual distance backend failed: {0}")]
    Metric(String),
    #[error("clip has no keyframes")]
    NoKeyframes,
    #[error("source {0} has no subtitles")]
    NoSubtitles(SourceId),
    #[error(transparent)]
    State(#[from] StateRegression),
    #[error("invalid splitter config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitterConfig {
    pub cutscene_threshold: f64,
    pub min_scene_len_frames: u32,
    pub artificial_cut_seconds: f64,
    pub consistency_max: f64,
    pub stitch_max: f64,
    pub motion_min: f64,
    pub dedup_min: f64,
    pub min_clip_seconds: f64,
    pub max_clip_seconds: f64,
    pub trim_fraction: f64,
}

impl Default for SplitterConfig {
    fn default() -> Self {
        Self {
            cutscene_threshold: 25.0,
            min_scene_len_frames: 15,
            artificial_cut_seconds: 5.0,
            consistency_max: 1.0,
            stitch_max: 0.6,
            motion_min: 0.15,
            dedup_min: 0.3,
            min_clip_seconds: 2.0,
            max_clip_seconds: 60.0,
            trim_fraction: 0.1,
        }
    }
}

impl SplitterConfig {
    pub fn validate(&self) -> Result<(), SplitError> {
        let reals = [
            ("cutscene_threshold", self.cutscene_threshold),
            ("artificial_cut_seconds", self.artificial_cut_seconds),
            ("consistency_max", self.consistency_max),
            ("stitch_max", self.stitch_max),
            ("motion_min", self.motion_min),
            ("dedup_min", self.dedup_min),
            ("min_clip_seconds", self.min_clip_seconds),
            ("max_clip_seconds", self.max_clip_seconds),
            ("trim_fraction", self.trim_fraction),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SplitError::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if self.trim_fraction >= 0.5 {
            return Err(SplitError::Config(format!("trim_fraction must be < 0.5, got {}", self.trim_fraction)));
        }
        if self.min_clip_seconds >= self.max_clip_seconds {
            return Err(SplitError::Config("min_clip_seconds must be < max_clip_seconds".into()));
        }
        if self.artificial_cut_seconds <= 0.0 {
            return Err(SplitError::Config("artificial_cut_seconds must be > 0".into()));
        }
        Ok(())
    }
}

/// Feature extraction for a single absolute frame of the source being split.
pub trait EndpointProbe: Sync {
    fn embed_at(&self, frame_index: u32) -> Result<Embedding, String>;
}

/// Reads frames from a source and embeds them through an embedding backend.
pub struct SourceProbe<'a> {
    pub source: &'a FrameSource,
    pub backend: &'a BackendClient,
}

impl EndpointProbe for SourceProbe<'_> {
    fn embed_at(&self, frame_index: u32) -> Result<Embedding, String> {
        let kf = self.source.frame_at(frame_index).map_err(|e| e.to_string())?;
        self.backend.embed_frame(&kf).map_err(|e| e.to_string())
    }
}

fn attach_endpoints(clips: &mut [ClipRecord], probe: &dyn EndpointProbe) -> Result<(), SplitError> {
    let ends: Vec<_> = clips.par_iter().map(|c| endpoint_embeddings(c, probe)).collect::<Result<_, _>>()?;
    for (clip, e) in clips.iter_mut().zip(ends) {
        clip.endpoint_embeddings = Some(e);
    }
    Ok(())
}

/// Runs both stages over one source. Returns every clip that reached a
/// terminal state, kept and dropped, ordered by start frame.
pub fn split_with(
    src: &FrameSource,
    cfg: &SplitterConfig,
    probe: &dyn EndpointProbe,
) -> Result<Vec<ClipRecord>, SplitError> {
    cfg.validate()?;
    let shots = detect_shots(src, cfg)?;
    let mut pieces = artificial_cuts(shots, cfg);
    attach_endpoints(&mut pieces, probe)?;
    let filtered = consistency_filter(pieces, cfg)?;
    let stitched = stitch(filtered, cfg, probe)?;
    postprocess(stitched, cfg)
}

pub fn split_source(
    src: &FrameSource,
    cfg: &SplitterConfig,
    embed: &BackendClient,
) -> Result<Vec<ClipRecord>, SplitError> {
    split_with(src, cfg, &SourceProbe { source: src, backend: embed })
}

pub fn kept(clips: &[ClipRecord]) -> impl Iterator<Item = &ClipRecord> {
    clips.iter().filter(|c| c.state == ClipState::Kept)
}
