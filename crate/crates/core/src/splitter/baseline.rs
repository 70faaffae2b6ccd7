//! Reference splitters for comparison runs.

use serde::{Deserialize, Serialize};

use crate::ingest::FrameSource;
use crate::model::{ClipRecord, ClipState, SourceVideo};

use super::{detect_shots, SplitError, SplitterConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineStrategy {
    /// One clip per subtitle sentence, at the sentence's time bounds.
    SubtitleAlign,
    /// Raw shot detection output.
    ShotsOnly,
}

pub fn baseline_split(
    src: &FrameSource,
    video: &SourceVideo,
    strategy: BaselineStrategy,
    cfg: &SplitterConfig,
) -> Result<Vec<ClipRecord>, SplitError> {
    match strategy {
        BaselineStrategy::ShotsOnly => detect_shots(src, cfg),
        BaselineStrategy::SubtitleAlign => subtitle_clips(video),
    }
}

pub fn subtitle_clips(video: &SourceVideo) -> Result<Vec<ClipRecord>, SplitError> {
    if video.subtitles.is_empty() {
        return Err(SplitError::NoSubtitles(video.id.clone()));
    }
    let fps = video.fps.as_f64();
    let to_frame = |t: f64| ((t * fps).round().max(0.0) as u32).min(video.frame_count);
    Ok(video
        .subtitles
        .iter()
        .map(|s| (to_frame(s.start_time), to_frame(s.end_time)))
        .filter(|(a, b)| a < b)
        .map(|(a, b)| ClipRecord::new(video.id.clone(), a, b, video.fps, ClipState::Raw))
        .collect())
}
