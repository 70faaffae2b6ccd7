//! Per-clip caption fan-out over the teacher roster: frame sampling for
//! image teachers, prompt construction, concurrent teacher calls and
//! candidate assembly.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gateway::{BackendClient, BackendError, Role};
use crate::ingest::{FrameSource, IngestError};
use crate::model::{CaptionCandidate, ClipId, ClipRecord, InputKind, RgbFrame, SourceVideo};

/// Prompt used when a teacher sees only the pixels.
pub const VISION_ONLY_PROMPT: &str = "Please faithfully summarize the video (or image) in one sentence.";

/// Canonical multi-section prompt template.
pub const PROMPT_TEMPLATE_V1: &str = include_str!("../resources/prompt_template_v1.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherKind {
    Video,
    Image,
}

/// Textual inputs a teacher accepts besides vision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TeacherInputs {
    #[serde(rename = "V")]
    Vision,
    #[serde(rename = "V-S")]
    VisionSubtitles,
    #[serde(rename = "V-M")]
    VisionMetadata,
    #[serde(rename = "V-S-M")]
    VisionSubtitlesMetadata,
}

impl TeacherInputs {
    pub fn subtitles(self) -> bool {
        matches!(self, TeacherInputs::VisionSubtitles | TeacherInputs::VisionSubtitlesMetadata)
    }

    pub fn metadata(self) -> bool {
        matches!(self, TeacherInputs::VisionMetadata | TeacherInputs::VisionSubtitlesMetadata)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherSpec {
    pub backend_id: String,
    pub kind: TeacherKind,
    pub inputs: TeacherInputs,
}

#[derive(Debug, thiserror::Error)]
pub enum FanoutError {
    #[error("teacher roster is empty")]
    EmptyRoster,
    #[error("roster lists teacher {0} twice")]
    DuplicateTeacher(String),
    #[error("roster teacher {0} has no caption backend")]
    UnknownTeacher(String),
    #[error("prompt template: {0}")]
    Template(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("every teacher failed for clip {clip}")]
    AllTeachersFailed { clip: ClipId, failures: Vec<TeacherFailure> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherFailure {
    pub clip_id: ClipId,
    pub teacher_id: String,
    pub reason: String,
}

/// A parsed prompt template: named sections of lines with `{field}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    sections: Vec<(String, Vec<String>)>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::parse(PROMPT_TEMPLATE_V1).expect("bundled template parses")
    }
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, FanoutError> {
        let mut sections: Vec<(String, Vec<String>)> = Vec::new();
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.starts_with('#') || trimmed.is_empty() {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                sections.push((name.to_owned(), Vec::new()));
            } else if let Some((_, lines)) = sections.last_mut() {
                lines.push(line.to_owned());
            } else {
                return Err(FanoutError::Template(format!("line outside any section: {line:?}")));
            }
        }
        for required in ["metadata", "subtitles", "instruction"] {
            if !sections.iter().any(|(n, _)| n == required) {
                return Err(FanoutError::Template(format!("missing [{required}] section")));
            }
        }
        Ok(Self { sections })
    }

    fn render(&self, fields: &HashMap<&str, String>, active: &HashSet<&str>) -> String {
        let mut out = Vec::new();
        for (name, lines) in &self.sections {
            if name != "instruction" && !active.contains(name.as_str()) {
                continue;
            }
            for line in lines {
                let mut rendered = line.clone();
                let mut empty_slot = false;
                for (key, value) in fields {
                    let slot = format!("{{{key}}}");
                    if rendered.contains(&slot) {
                        empty_slot |= value.is_empty();
                        rendered = rendered.replace(&slot, value);
                    }
                }
                if !empty_slot {
                    out.push(rendered);
                }
            }
        }
        out.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltPrompt {
    pub text: String,
    pub inputs_used: BTreeSet<InputKind>,
    /// Requested inputs that were unavailable and left out.
    pub downgrades: Vec<InputKind>,
}

/// Subtitle text overlapping the clip interval, in start-time order.
pub fn clip_subtitles(video: &SourceVideo, clip: &ClipRecord) -> String {
    let fps = video.fps.as_f64();
    let (t0, t1) = (clip.start_frame as f64 / fps, clip.end_frame as f64 / fps);
    let mut subs: Vec<_> = video.subtitles.iter().filter(|s| s.start_time < t1 && s.end_time > t0).collect();
    subs.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
    subs.iter().map(|s| s.text.trim()).filter(|t| !t.is_empty()).collect::<Vec<_>>().join(" ")
}

pub fn build_prompt(
    video: &SourceVideo,
    clip: &ClipRecord,
    use_subtitles: bool,
    use_metadata: bool,
    template: &PromptTemplate,
) -> BuiltPrompt {
    let mut inputs_used = BTreeSet::from([InputKind::Vision]);
    let mut downgrades = Vec::new();
    let mut active = HashSet::new();
    let title = video.title.clone().unwrap_or_default().trim().to_owned();
    let description = video.description.clone().unwrap_or_default().trim().to_owned();
    let subtitles = clip_subtitles(video, clip);
    if use_metadata {
        if title.is_empty() && description.is_empty() {
            downgrades.push(InputKind::Metadata);
        } else {
            active.insert("metadata");
            inputs_used.insert(InputKind::Metadata);
        }
    }
    if use_subtitles {
        if subtitles.is_empty() {
            downgrades.push(InputKind::Subtitles);
        } else {
            active.insert("subtitles");
            inputs_used.insert(InputKind::Subtitles);
        }
    }
    if active.is_empty() {
        return BuiltPrompt { text: VISION_ONLY_PROMPT.to_owned(), inputs_used, downgrades };
    }
    let fields = HashMap::from([("title", title), ("description", description), ("subtitles", subtitles)]);
    BuiltPrompt { text: template.render(&fields, &active), inputs_used, downgrades }
}

/// Clip-relative frame for image teachers, uniform over
/// `[floor(0.3 n), floor(0.7 n)]`.
pub fn sample_image_frame(n: u32, rng: &mut impl Rng) -> u32 {
    assert!(n > 0, "empty clip");
    let lo = (n as u64 * 3 / 10) as u32;
    let hi = (n as u64 * 7 / 10) as u32;
    rng.random_range(lo..=hi.min(n - 1).max(lo))
}

/// Per-clip RNG stream, independent of scheduling order.
pub fn clip_rng(clip_id: &ClipId, run_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(clip_id.seed() ^ run_seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanoutOutcome {
    pub candidates: Vec<CaptionCandidate>,
    pub failures: Vec<TeacherFailure>,
    pub image_frame: u32,
}

/// Checks a roster against the available caption backends.
pub fn check_roster(roster: &[TeacherSpec], clients: &HashMap<String, BackendClient>) -> Result<(), FanoutError> {
    if roster.is_empty() {
        return Err(FanoutError::EmptyRoster);
    }
    let mut seen = HashSet::new();
    for t in roster {
        if !seen.insert(&t.backend_id) {
            return Err(FanoutError::DuplicateTeacher(t.backend_id.clone()));
        }
        match clients.get(&t.backend_id) {
            Some(c) if c.descriptor().role == Role::Caption => {}
            _ => return Err(FanoutError::UnknownTeacher(t.backend_id.clone())),
        }
    }
    Ok(())
}

/// Frames handed to the teachers for one clip.
pub struct ClipPayload {
    pub keyframes: Vec<RgbFrame>,
    pub image_frame: u32,
    pub image: RgbFrame,
}

impl ClipPayload {
    pub fn load(src: &FrameSource, clip: &ClipRecord, run_seed: u64) -> Result<Self, IngestError> {
        let keyframes =
            src.per_second_keyframes(clip.start_frame, clip.end_frame)?.into_iter().map(|k| k.frame).collect();
        let offset = sample_image_frame(clip.frame_span(), &mut clip_rng(&clip.clip_id, run_seed));
        let image = src.frame_at(clip.start_frame + offset)?.frame;
        Ok(Self { keyframes, image_frame: offset, image })
    }
}

/// Calls every roster teacher for the clip concurrently; candidates come
/// back in roster order. Individual failures are recorded, not fatal.
pub fn fanout(
    video: &SourceVideo,
    clip: &ClipRecord,
    payload: &ClipPayload,
    roster: &[TeacherSpec],
    clients: &HashMap<String, BackendClient>,
    template: &PromptTemplate,
) -> Result<FanoutOutcome, FanoutError> {
    check_roster(roster, clients)?;
    let results: Vec<Result<CaptionCandidate, BackendError>> = std::thread::scope(|s| {
        let handles: Vec<_> = roster
            .iter()
            .map(|t| {
                let client = &clients[&t.backend_id];
                s.spawn(move || {
                    let prompt = build_prompt(video, clip, t.inputs.subtitles(), t.inputs.metadata(), template);
                    let frames: &[RgbFrame] = match t.kind {
                        TeacherKind::Video => &payload.keyframes,
                        TeacherKind::Image => std::slice::from_ref(&payload.image),
                    };
                    client.caption(frames, &prompt.text).map(|text| CaptionCandidate {
                        clip_id: clip.clip_id.clone(),
                        teacher_id: t.backend_id.clone(),
                        text,
                        inputs_used: prompt.inputs_used,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("teacher thread panicked")).collect()
    });
    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    for (t, r) in roster.iter().zip(results) {
        match r {
            Ok(c) => candidates.push(c),
            Err(e) => failures.push(TeacherFailure {
                clip_id: clip.clip_id.clone(),
                teacher_id: t.backend_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if candidates.is_empty() {
        return Err(FanoutError::AllTeachersFailed { clip: clip.clip_id.clone(), failures });
    }
    Ok(FanoutOutcome { candidates, failures, image_frame: payload.image_frame })
}
