//! Shared domain records and their invariant checks.
//!
//! Every record here is an immutable value. Invariant violations are reported
//! as data through [`Validate`] rather than as errors, so callers can collect
//! and print all of them at once.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Hard upper bound on captions shown to an annotator at once.
pub const MAX_PAGE_SIZE: usize = 11;

/// Bounds on the duration of a kept clip, after the 10% trim.
pub const KEPT_MIN_SECONDS: f64 = 1.6;
pub const KEPT_MAX_SECONDS: f64 = 60.0;

/// Frame rate as an exact rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub const fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }

    pub const fn integer(fps: u32) -> Self {
        Self { num: fps, den: 1 }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_valid(&self) -> bool {
        self.num > 0 && self.den > 0
    }

    /// Seconds spanned by `frames` frames.
    pub fn seconds(&self, frames: u64) -> f64 {
        frames as f64 * self.den as f64 / self.num as f64
    }

    /// Whole seconds spanned by `frames` frames, rounded down exactly.
    pub fn whole_seconds(&self, frames: u64) -> u64 {
        frames * self.den as u64 / self.num as u64
    }

    /// `round(k * fps)` in exact integer arithmetic (halves round up).
    pub fn frames_at_second(&self, k: u64) -> u64 {
        (2 * k * self.num as u64 + self.den as u64) / (2 * self.den as u64)
    }

    /// Largest frame count whose duration does not exceed `seconds`.
    pub fn frames_within(&self, seconds: f64) -> u64 {
        (seconds * self.num as f64 / self.den as f64 + 1e-9).floor().max(0.0) as u64
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl From<Fps> for String {
    fn from(f: Fps) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for Fps {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let num = num.parse::<u32>().map_err(|e| format!("bad fps numerator {num:?}: {e}"))?;
        let den = den.parse::<u32>().map_err(|e| format!("bad fps denominator {den:?}: {e}"))?;
        Ok(Fps { num, den })
    }
}

/// Content-derived identifier of a source video.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceId(pub String);

impl SourceId {
    pub fn from_content(bytes: &[u8]) -> Self {
        let digest = Sha256::digest(bytes);
        SourceId(hex::encode(&digest[..8]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Stable clip identifier: a pure function of the source and the frame interval.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClipId(pub String);

impl ClipId {
    pub fn derive(source: &SourceId, start_frame: u32, end_frame: u32) -> Self {
        let mut h = Sha256::new();
        h.update(source.0.as_bytes());
        h.update([0u8]);
        h.update(start_frame.to_le_bytes());
        h.update(end_frame.to_le_bytes());
        ClipId(hex::encode(&h.finalize()[..10]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// 64-bit seed derived from the id, used for per-clip RNG streams.
    pub fn seed(&self) -> u64 {
        let digest = Sha256::digest(self.0.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

impl fmt::Display for ClipId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtitle {
    pub start_time: f64,
    pub end_time: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceVideo {
    pub id: SourceId,
    pub frame_count: u32,
    pub fps: Fps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subtitles: Vec<Subtitle>,
}

impl SourceVideo {
    pub fn duration_seconds(&self) -> f64 {
        self.fps.seconds(self.frame_count as u64)
    }
}

/// Packed 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), width as usize * height as usize * 3);
        Self { width, height, data }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self { width, height, data }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }
}

impl fmt::Debug for RgbFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RgbFrame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bytes", &self.data.len())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub source_id: SourceId,
    pub frame_index: u32,
    pub frame: RgbFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub backend_id: String,
}

impl Embedding {
    pub fn new(backend_id: impl Into<String>, vector: Vec<f32>) -> Self {
        Self { vector, backend_id: backend_id.into() }
    }

    pub fn dimension(&self) -> usize {
        self.vector.len()
    }

    /// Euclidean distance, accumulated in f64.
    pub fn distance(&self, other: &Embedding) -> f64 {
        euclidean(&self.vector, &other.vector)
    }

    /// Element-wise mean of two embeddings of equal dimension.
    pub fn midpoint(&self, other: &Embedding) -> Embedding {
        let vector =
            self.vector.iter().zip(&other.vector).map(|(a, b)| ((*a as f64 + *b as f64) / 2.0) as f32).collect();
        Embedding { vector, backend_id: self.backend_id.clone() }
    }
}

pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Endpoint features differ too much: a transition or a semantic change.
    Transition,
    TooShort,
    Motionless,
    Duplicate,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::Transition => "transition",
            DropReason::TooShort => "too_short",
            DropReason::Motionless => "motionless",
            DropReason::Duplicate => "duplicate",
        };
        f.write_str(s)
    }
}

/// Lifecycle of a clip through the splitter. States only move forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipState {
    Raw,
    Shot,
    Cut5s,
    Filtered,
    Stitched,
    Kept,
    Dropped(DropReason),
}

impl ClipState {
    fn rank(self) -> u8 {
        match self {
            ClipState::Raw => 0,
            ClipState::Shot => 1,
            ClipState::Cut5s => 2,
            ClipState::Filtered => 3,
            ClipState::Stitched => 4,
            ClipState::Kept | ClipState::Dropped(_) => 5,
        }
    }

    pub fn is_terminal(self) -> bool {
        self.rank() == 5
    }

    pub fn is_dropped(self) -> bool {
        matches!(self, ClipState::Dropped(_))
    }

    pub fn can_advance_to(self, next: ClipState) -> bool {
        !self.is_terminal() && next.rank() > self.rank()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("illegal clip state transition {from:?} -> {to:?}")]
pub struct StateRegression {
    pub from: ClipState,
    pub to: ClipState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: ClipId,
    pub source_id: SourceId,
    pub start_frame: u32,
    pub end_frame: u32,
    pub fps: Fps,
    pub state: ClipState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_embeddings: Option<(Embedding, Embedding)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_embedding: Option<Embedding>,
}

impl ClipRecord {
    pub fn new(source_id: SourceId, start_frame: u32, end_frame: u32, fps: Fps, state: ClipState) -> Self {
        Self {
            clip_id: ClipId::derive(&source_id, start_frame, end_frame),
            source_id,
            start_frame,
            end_frame,
            fps,
            state,
            endpoint_embeddings: None,
            mean_embedding: None,
        }
    }

    pub fn frame_span(&self) -> u32 {
        self.end_frame.saturating_sub(self.start_frame)
    }

    pub fn duration_seconds(&self) -> f64 {
        self.fps.seconds(self.frame_span() as u64)
    }

    /// Re-derive the id after the interval moved.
    pub fn with_interval(mut self, start_frame: u32, end_frame: u32) -> Self {
        self.start_frame = start_frame;
        self.end_frame = end_frame;
        self.clip_id = ClipId::derive(&self.source_id, start_frame, end_frame);
        self
    }

    pub fn advance(&mut self, next: ClipState) -> Result<(), StateRegression> {
        if self.state.can_advance_to(next) {
            self.state = next;
            Ok(())
        } else {
            Err(StateRegression { from: self.state, to: next })
        }
    }

    pub fn endpoint_distance(&self) -> Option<f64> {
        self.endpoint_embeddings.as_ref().map(|(a, b)| a.distance(b))
    }

    /// Checks that need the owning source (interval bounds).
    pub fn validate_within(&self, source: &SourceVideo) -> Vec<Violation> {
        let mut out = self.validate();
        if self.source_id != source.id {
            out.push(Violation::new("source_id", "does not match the owning source"));
        }
        if self.end_frame > source.frame_count {
            out.push(Violation::new("end_frame", "end_frame > source frame_count"));
        }
        out
    }
}

/// Which inputs a teacher actually consumed for a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Vision,
    Subtitles,
    Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionCandidate {
    pub clip_id: ClipId,
    pub teacher_id: String,
    pub text: String,
    pub inputs_used: BTreeSet<InputKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCaption {
    pub candidate: CaptionCandidate,
    pub matching_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessMatrix {
    pub video_ids: Vec<String>,
    pub model_ids: Vec<String>,
    /// Row-major: `cells[v][m]`.
    pub cells: Vec<Vec<bool>>,
}

impl GoodnessMatrix {
    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let v = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        Self {
            video_ids: (1..=v).map(|i| format!("v{i}")).collect(),
            model_ids: (1..=m).map(|i| format!("m{i}")).collect(),
            cells: rows.iter().map(|r| r.iter().map(|&c| c != 0).collect()).collect(),
        }
    }

    pub fn videos(&self) -> usize {
        self.video_ids.len()
    }

    pub fn models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn column_sum(&self, model: usize) -> usize {
        self.cells.iter().filter(|row| row[model]).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationMode {
    EveryGood,
    BestCaption,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub annotator_id: String,
    /// Milliseconds on the task store's clock.
    pub expires_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub clip_id: ClipId,
    pub mode: AnnotationMode,
    /// Original candidate indices in display order.
    pub caption_order: Vec<usize>,
    /// Number of candidates the clip has in total.
    pub candidate_count: usize,
    pub page_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lease: Option<Lease>,
}

/// An annotator's verdict. All-Bad is its own variant, never an index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Good(BTreeSet<usize>),
    Best(usize),
    AllBad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub task_id: String,
    pub annotator_id: String,
    pub selection: Selection,
}

impl AnnotationResult {
    /// Checks the selection against the task it answers.
    pub fn validate_for(&self, task: &AnnotationTask) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.task_id != task.task_id {
            out.push(Violation::new("task_id", "result does not belong to this task"));
        }
        match (&self.selection, task.mode) {
            (Selection::AllBad, _) => {}
            (Selection::Best(i), AnnotationMode::BestCaption) => {
                if !task.caption_order.contains(i) {
                    out.push(Violation::new("selection", format!("index {i} not shown in task")));
                }
            }
            (Selection::Good(set), AnnotationMode::EveryGood) => {
                if set.is_empty() {
                    out.push(Violation::new("selection", "empty selection without all_bad"));
                }
                for i in set {
                    if !task.caption_order.contains(i) {
                        out.push(Violation::new("selection", format!("index {i} not shown in task")));
                    }
                }
            }
            (Selection::Best(_), AnnotationMode::EveryGood) => {
                out.push(Violation::new("selection", "single choice submitted for every_good task"))
            }
            (Selection::Good(_), AnnotationMode::BestCaption) => {
                out.push(Violation::new("selection", "best_caption selects exactly one index or all_bad"))
            }
        }
        out
    }
}

/// One broken invariant, addressed by a field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

pub trait Validate {
    fn validate(&self) -> Vec<Violation>;
}

/// Ok iff the record satisfies all of its invariants.
pub fn validate_record<T: Validate + ?Sized>(record: &T) -> Result<(), Vec<Violation>> {
    let v = record.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

impl Validate for SourceVideo {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.frame_count < 1 {
            out.push(Violation::new("frame_count", "frame_count < 1"));
        }
        if !self.fps.is_valid() {
            out.push(Violation::new("fps", "fps must be > 0"));
        }
        let duration = if self.fps.is_valid() { self.duration_seconds() } else { 0.0 };
        for (i, s) in self.subtitles.iter().enumerate() {
            if !(s.start_time.is_finite() && s.end_time.is_finite()) || s.start_time > s.end_time {
                out.push(Violation::new(format!("subtitles[{i}]"), "start_time > end_time"));
            }
            if s.start_time < 0.0 || s.end_time > duration + 1e-9 {
                out.push(Violation::new(format!("subtitles[{i}]"), "interval outside the video"));
            }
        }
        out
    }
}

impl Validate for Embedding {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.vector.is_empty() {
            out.push(Violation::new("vector", "empty embedding"));
        }
        if let Some(i) = self.vector.iter().position(|x| !x.is_finite()) {
            out.push(Violation::new(format!("vector[{i}]"), "non-finite entry"));
        }
        out
    }
}

impl Validate for ClipRecord {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.start_frame >= self.end_frame {
            out.push(Violation::new("end_frame", "empty interval"));
        }
        if !self.fps.is_valid() {
            out.push(Violation::new("fps", "fps must be > 0"));
        } else if self.state == ClipState::Kept {
            let d = self.duration_seconds();
            if !(KEPT_MIN_SECONDS - 1e-9..=KEPT_MAX_SECONDS + 1e-9).contains(&d) {
                out.push(Violation::new("state", format!("kept clip duration {d:.3}s outside [1.6, 60]")));
            }
        }
        if self.clip_id != ClipId::derive(&self.source_id, self.start_frame, self.end_frame) {
            out.push(Violation::new("clip_id", "clip_id does not match (source_id, start_frame, end_frame)"));
        }
        if let Some((a, b)) = &self.endpoint_embeddings {
            for (name, e) in [("endpoint_embeddings.0", a), ("endpoint_embeddings.1", b)] {
                out.extend(e.validate().into_iter().map(|v| Violation::new(format!("{name}.{}", v.path), v.message)));
            }
            if a.dimension() != b.dimension() {
                out.push(Violation::new("endpoint_embeddings", "dimension mismatch"));
            }
        }
        if let Some(m) = &self.mean_embedding {
            out.extend(
                m.validate().into_iter().map(|v| Violation::new(format!("mean_embedding.{}", v.path), v.message)),
            );
        }
        out
    }
}

impl Validate for CaptionCandidate {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.text.trim().is_empty() {
            out.push(Violation::new("text", "empty caption"));
        }
        if self.teacher_id.is_empty() {
            out.push(Violation::new("teacher_id", "empty teacher id"));
        }
        out
    }
}

impl Validate for ScoredCaption {
    fn validate(&self) -> Vec<Violation> {
        let mut out: Vec<_> = self
            .candidate
            .validate()
            .into_iter()
            .map(|v| Violation::new(format!("candidate.{}", v.path), v.message))
            .collect();
        if !self.matching_score.is_finite() {
            out.push(Violation::new("matching_score", "non-finite score"));
        }
        out
    }
}

impl Validate for GoodnessMatrix {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.video_ids.is_empty() {
            out.push(Violation::new("video_ids", "no videos"));
        }
        if self.model_ids.is_empty() {
            out.push(Violation::new("model_ids", "no models"));
        }
        if self.cells.len() != self.video_ids.len() {
            out.push(Violation::new("cells", "row count differs from video_ids"));
        }
        for (i, row) in self.cells.iter().enumerate() {
            if row.len() != self.model_ids.len() {
                out.push(Violation::new(format!("cells[{i}]"), "not rectangular"));
            }
        }
        out
    }
}

impl Validate for AnnotationTask {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.page_size > MAX_PAGE_SIZE {
            out.push(Violation::new("page_size", "page_size > 11"));
        }
        if self.page_size == 0 {
            out.push(Violation::new("page_size", "page_size must be >= 1"));
        }
        if self.caption_order.len() > self.page_size {
            out.push(Violation::new("caption_order", "more captions than page_size"));
        }
        let distinct: BTreeSet<_> = self.caption_order.iter().collect();
        if distinct.len() != self.caption_order.len() {
            out.push(Violation::new("caption_order", "not a permutation: repeated index"));
        }
        if self.caption_order.iter().any(|&i| i >= self.candidate_count) {
            out.push(Violation::new("caption_order", "index out of range"));
        }
        if self.mode == AnnotationMode::BestCaption && self.caption_order.len() != self.candidate_count {
            out.push(Violation::new("caption_order", "best_caption task must show every candidate"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src() -> SourceVideo {
        SourceVideo {
            id: SourceId("abc".into()),
            frame_count: 300,
            fps: Fps::integer(30),
            title: Some("t".into()),
            description: None,
            subtitles: vec![Subtitle { start_time: 0.0, end_time: 2.0, text: "hi".into() }],
        }
    }

    #[test]
    fn empty_interval_is_a_violation() {
        let c = ClipRecord::new(SourceId("abc".into()), 10, 10, Fps::integer(30), ClipState::Raw);
        let v = validate_record(&c).unwrap_err();
        assert!(v.iter().any(|v| v.message == "empty interval"));
    }

    #[test]
    fn page_size_over_eleven_is_a_violation() {
        let t = AnnotationTask {
            task_id: "t".into(),
            clip_id: ClipId("c".into()),
            mode: AnnotationMode::EveryGood,
            caption_order: vec![0, 1],
            candidate_count: 2,
            page_size: 12,
            lease: None,
        };
        let v = validate_record(&t).unwrap_err();
        assert!(v.iter().any(|v| v.message == "page_size > 11"));
    }

    #[test]
    fn well_formed_source_is_ok() {
        assert_eq!(validate_record(&src()), Ok(()));
    }

    #[test]
    fn subtitle_outside_video_is_caught() {
        let mut s = src();
        s.subtitles.push(Subtitle { start_time: 9.0, end_time: 11.0, text: "late".into() });
        s.subtitles.push(Subtitle { start_time: 3.0, end_time: 2.0, text: "reversed".into() });
        let v = validate_record(&s).unwrap_err();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn kept_clip_duration_bounds() {
        let fps = Fps::integer(30);
        let mut c = ClipRecord::new(SourceId("s".into()), 0, 47, fps, ClipState::Kept);
        assert!(validate_record(&c).is_err());
        c = c.with_interval(0, 48);
        assert_eq!(validate_record(&c), Ok(()));
        c = c.with_interval(0, 1801);
        assert!(validate_record(&c).is_err());
    }

    #[test]
    fn clip_id_is_pure() {
        let s = SourceId("vid".into());
        assert_eq!(ClipId::derive(&s, 3, 90), ClipId::derive(&s, 3, 90));
        assert_ne!(ClipId::derive(&s, 3, 90), ClipId::derive(&s, 3, 91));
        assert_ne!(ClipId::derive(&s, 3, 90), ClipId::derive(&SourceId("vid2".into()), 3, 90));
    }

    #[test]
    fn states_only_move_forward() {
        let mut c = ClipRecord::new(SourceId("s".into()), 0, 10, Fps::integer(30), ClipState::Shot);
        assert!(c.advance(ClipState::Raw).is_err());
        c.advance(ClipState::Filtered).unwrap();
        c.advance(ClipState::Dropped(DropReason::Motionless)).unwrap();
        assert!(c.advance(ClipState::Kept).is_err());
        assert!(c.advance(ClipState::Stitched).is_err());
    }

    #[test]
    fn fps_parses_and_prints() {
        let f: Fps = "30000/1001".to_string().try_into().unwrap();
        assert_eq!(f, Fps::new(30000, 1001));
        assert_eq!(f.to_string(), "30000/1001");
        let g: Fps = "25".to_string().try_into().unwrap();
        assert_eq!(g, Fps::integer(25));
    }

    #[test]
    fn all_bad_is_not_an_index() {
        let t = AnnotationTask {
            task_id: "t".into(),
            clip_id: ClipId("c".into()),
            mode: AnnotationMode::BestCaption,
            caption_order: vec![1, 0],
            candidate_count: 2,
            page_size: 2,
            lease: None,
        };
        let ok = AnnotationResult { task_id: "t".into(), annotator_id: "a".into(), selection: Selection::AllBad };
        assert!(ok.validate_for(&t).is_empty());
        let bad = AnnotationResult { selection: Selection::Best(2), ..ok.clone() };
        assert_eq!(bad.validate_for(&t).len(), 1);
        let multi = AnnotationResult { selection: Selection::Good([0].into()), ..ok };
        assert_eq!(multi.validate_for(&t).len(), 1);
    }

    #[test]
    fn nonfinite_embedding_entries_are_caught() {
        let e = Embedding::new("b", vec![0.0, f32::NAN]);
        assert!(validate_record(&e).is_err());
    }
}
