//! Frame access over raw containers and external decoders, plus the
//! synthetic fixture generator used as a bit-exact test substrate.
//!
//! Raw container layout (little endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RVC1"
//! 4       4     width  (u32)
//! 8       4     height (u32)
//! 12      4     fps numerator   (u32)
//! 16      4     fps denominator (u32)
//! 20      4     frame_count     (u32)
//! 24      ...   frame_count * width * height * 3 bytes of packed RGB
//! ```

use std::fs::File;
use std::io::{self, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::model::{Fps, Keyframe, RgbFrame, SourceId};

pub const RAW_MAGIC: &[u8; 4] = b"RVC1";
pub const RAW_HEADER_LEN: u64 = 24;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: PathBuf, source: io::Error },
    #[error("malformed raw container {path}: {reason}")]
    BadContainer { path: PathBuf, reason: String },
    #[error("decoder handshake failed for {media}: {reason}")]
    Handshake { media: PathBuf, reason: String },
    #[error("media reports zero frames: {0}")]
    ZeroFrames(PathBuf),
    #[error("frame index {index} out of range (frame_count {frame_count})")]
    OutOfRange { index: u32, frame_count: u32 },
    #[error("decode failure at frame {index}: {reason}")]
    Decode { index: u32, reason: String },
    #[error("invalid interval [{start}, {end}) for {frame_count} frames")]
    InvalidInterval { start: u32, end: u32, frame_count: u32 },
    #[error("fixture spec has no scenes")]
    EmptyFixture,
    #[error("invalid fixture spec: {0}")]
    InvalidFixture(String),
    #[error("write failed for {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrameDescriptor {
    RawContainer {
        path: PathBuf,
    },
    /// `command probe <media>` prints JSON metadata; `command frame <media> <index>`
    /// writes one packed RGB frame to stdout, or exits non-zero with a JSON
    /// `{"error": ...}` object on stderr.
    ExternalDecoder {
        command: String,
        media: PathBuf,
    },
}

impl FrameDescriptor {
    pub fn raw(path: impl Into<PathBuf>) -> Self {
        FrameDescriptor::RawContainer { path: path.into() }
    }

    pub fn media_path(&self) -> &Path {
        match self {
            FrameDescriptor::RawContainer { path } => path,
            FrameDescriptor::ExternalDecoder { media, .. } => media,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ProbeReply {
    frame_count: u32,
    fps_num: u32,
    fps_den: u32,
    width: u32,
    height: u32,
}

#[derive(Debug, Deserialize)]
struct DecoderErrorReply {
    error: String,
}

enum Reader {
    Raw(Mutex<File>),
    External { command: String, media: PathBuf },
}

/// An opened video. Reads are serialized internally; open one source per worker.
pub struct FrameSource {
    descriptor: FrameDescriptor,
    pub source_id: SourceId,
    pub frame_count: u32,
    pub fps: Fps,
    pub width: u32,
    pub height: u32,
    reader: Reader,
}

impl std::fmt::Debug for FrameSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameSource")
            .field("descriptor", &self.descriptor)
            .field("frame_count", &self.frame_count)
            .field("fps", &self.fps)
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

/// Identifier derived from the container header and the first frame, so
/// opening a multi-gigabyte file stays cheap.
fn content_id(header: &[u8], first_frame: &[u8], file_len: u64) -> SourceId {
    let mut buf = Vec::with_capacity(header.len() + first_frame.len() + 8);
    buf.extend_from_slice(header);
    buf.extend_from_slice(&file_len.to_le_bytes());
    buf.extend_from_slice(first_frame);
    SourceId::from_content(&buf)
}

impl FrameSource {
    pub fn open(descriptor: &FrameDescriptor) -> Result<Self, IngestError> {
        match descriptor {
            FrameDescriptor::RawContainer { path } => Self::open_raw(path),
            FrameDescriptor::ExternalDecoder { command, media } => Self::open_external(command, media),
        }
    }

    fn open_raw(path: &Path) -> Result<Self, IngestError> {
        let unreadable = |source| IngestError::Unreadable { path: path.to_owned(), source };
        let bad = |reason: &str| IngestError::BadContainer { path: path.to_owned(), reason: reason.to_owned() };
        let mut file = File::open(path).map_err(unreadable)?;
        let file_len = file.metadata().map_err(unreadable)?.len();
        let mut header = [0u8; RAW_HEADER_LEN as usize];
        file.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        if &header[..4] != RAW_MAGIC {
            return Err(bad("bad magic"));
        }
        let (width, height) = (read_u32(&header, 4), read_u32(&header, 8));
        let fps = Fps::new(read_u32(&header, 12), read_u32(&header, 16));
        let frame_count = read_u32(&header, 20);
        if width == 0 || height == 0 {
            return Err(bad("zero frame dimension"));
        }
        if !fps.is_valid() {
            return Err(bad("fps must be > 0"));
        }
        if frame_count == 0 {
            return Err(IngestError::ZeroFrames(path.to_owned()));
        }
        let frame_bytes = width as u64 * height as u64 * 3;
        if file_len != RAW_HEADER_LEN + frame_bytes * frame_count as u64 {
            return Err(bad("payload length does not match header"));
        }
        let mut first = vec![0u8; frame_bytes as usize];
        file.read_exact(&mut first).map_err(unreadable)?;
        Ok(Self {
            descriptor: FrameDescriptor::RawContainer { path: path.to_owned() },
            source_id: content_id(&header, &first, file_len),
            frame_count,
            fps,
            width,
            height,
            reader: Reader::Raw(Mutex::new(file)),
        })
    }

    fn open_external(command: &str, media: &Path) -> Result<Self, IngestError> {
        if !media.exists() {
            return Err(IngestError::Unreadable {
                path: media.to_owned(),
                source: io::Error::new(io::ErrorKind::NotFound, "media file not found"),
            });
        }
        let handshake = |reason: String| IngestError::Handshake { media: media.to_owned(), reason };
        let out = Command::new(command)
            .arg("probe")
            .arg(media)
            .output()
            .map_err(|e| handshake(format!("spawn {command}: {e}")))?;
        if !out.status.success() {
            return Err(handshake(decoder_error(&out.stderr)));
        }
        let probe: ProbeReply =
            serde_json::from_slice(&out.stdout).map_err(|e| handshake(format!("bad probe reply: {e}")))?;
        if probe.frame_count == 0 {
            return Err(IngestError::ZeroFrames(media.to_owned()));
        }
        let fps = Fps::new(probe.fps_num, probe.fps_den);
        if !fps.is_valid() || probe.width == 0 || probe.height == 0 {
            return Err(handshake("probe reported invalid fps or dimensions".into()));
        }
        let mut src = Self {
            descriptor: FrameDescriptor::ExternalDecoder { command: command.to_owned(), media: media.to_owned() },
            source_id: SourceId(String::new()),
            frame_count: probe.frame_count,
            fps,
            width: probe.width,
            height: probe.height,
            reader: Reader::External { command: command.to_owned(), media: media.to_owned() },
        };
        let first = src.read_frame(0)?;
        src.source_id = content_id(&out.stdout, &first.data, probe.frame_count as u64);
        Ok(src)
    }

    pub fn descriptor(&self) -> &FrameDescriptor {
        &self.descriptor
    }

    fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }

    fn read_frame(&self, index: u32) -> Result<RgbFrame, IngestError> {
        if index >= self.frame_count {
            return Err(IngestError::OutOfRange { index, frame_count: self.frame_count });
        }
        let len = self.frame_len();
        let data = match &self.reader {
            Reader::Raw(file) => {
                let mut file = file.lock();
                let mut buf = vec![0u8; len];
                file.seek(SeekFrom::Start(RAW_HEADER_LEN + index as u64 * len as u64))
                    .and_then(|_| file.read_exact(&mut buf))
                    .map_err(|e| IngestError::Decode { index, reason: e.to_string() })?;
                buf
            }
            Reader::External { command, media } => {
                let out = Command::new(command)
                    .arg("frame")
                    .arg(media)
                    .arg(index.to_string())
                    .output()
                    .map_err(|e| IngestError::Decode { index, reason: e.to_string() })?;
                if !out.status.success() {
                    return Err(IngestError::Decode { index, reason: decoder_error(&out.stderr) });
                }
                if out.stdout.len() != len {
                    return Err(IngestError::Decode {
                        index,
                        reason: format!("expected {len} bytes, decoder wrote {}", out.stdout.len()),
                    });
                }
                out.stdout
            }
        };
        Ok(RgbFrame::new(self.width, self.height, data))
    }

    pub fn frame_at(&self, index: u32) -> Result<Keyframe, IngestError> {
        Ok(Keyframe { source_id: self.source_id.clone(), frame_index: index, frame: self.read_frame(index)? })
    }

    pub fn check_interval(&self, start: u32, end: u32) -> Result<(), IngestError> {
        if start >= end || end > self.frame_count {
            return Err(IngestError::InvalidInterval { start, end, frame_count: self.frame_count });
        }
        Ok(())
    }

    pub fn per_second_keyframes(&self, start: u32, end: u32) -> Result<Vec<Keyframe>, IngestError> {
        self.check_interval(start, end)?;
        per_second_indices(self.fps, start, end)?.into_iter().map(|i| self.frame_at(i)).collect()
    }
}

fn decoder_error(stderr: &[u8]) -> String {
    match serde_json::from_slice::<DecoderErrorReply>(stderr) {
        Ok(r) => r.error,
        Err(_) => String::from_utf8_lossy(stderr).trim().to_owned(),
    }
}

/// Keyframe schedule: `start + round(k * fps)` for `k in 0..max(1, floor(duration))`.
pub fn per_second_indices(fps: Fps, start: u32, end: u32) -> Result<Vec<u32>, IngestError> {
    if start >= end {
        return Err(IngestError::InvalidInterval { start, end, frame_count: end });
    }
    let span = (end - start) as u64;
    let count = fps.whole_seconds(span).max(1);
    Ok((0..count)
        .map(|k| start as u64 + fps.frames_at_second(k))
        .take_while(|&i| i < end as u64)
        .map(|i| i as u32)
        .collect())
}

/// Writes a raw container from an iterator of frames.
pub fn write_raw_container<I>(path: &Path, width: u32, height: u32, fps: Fps, frames: I) -> Result<u32, IngestError>
where
    I: IntoIterator<Item = RgbFrame>,
{
    let werr = |source| IngestError::Write { path: path.to_owned(), source };
    let file = File::create(path).map_err(werr)?;
    let mut w = BufWriter::new(file);
    let mut header = Vec::with_capacity(RAW_HEADER_LEN as usize);
    header.extend_from_slice(RAW_MAGIC);
    for v in [width, height, fps.num, fps.den, 0] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&header).map_err(werr)?;
    let mut count = 0u32;
    for f in frames {
        if f.width != width || f.height != height {
            return Err(IngestError::InvalidFixture(format!("frame {count} has wrong dimensions")));
        }
        w.write_all(&f.data).map_err(werr)?;
        count += 1;
    }
    if count == 0 {
        return Err(IngestError::ZeroFrames(path.to_owned()));
    }
    w.seek(SeekFrom::Start(20)).map_err(werr)?;
    w.write_all(&count.to_le_bytes()).map_err(werr)?;
    w.flush().map_err(werr)?;
    Ok(count)
}

/// How a fixture scene is painted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Fill {
    Solid {
        rgb: [u8; 3],
    },
    /// Gray ramp: every channel of pixel (x, y) at global frame `i` is
    /// `(i * step + x + y) mod 256`.
    Gradient {
        step: u8,
    },
    /// Two-color split. The `primary` color covers a fraction of the columns
    /// that moves linearly from `from` to `to` across the scene; `mirrored`
    /// puts the primary region on the right.
    Split {
        primary: [u8; 3],
        secondary: [u8; 3],
        from: f64,
        to: f64,
        mirrored: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Transition {
    Cut,
    /// Linear cross-fade occupying the last `seconds` of the outgoing scene.
    Fade {
        seconds: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seconds: f64,
    pub fill: Fill,
    pub transition: Transition,
}

impl SceneSpec {
    pub fn new(seconds: f64, fill: Fill, transition: Transition) -> Self {
        Self { seconds, fill, transition }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub width: u32,
    pub height: u32,
    pub fps: Fps,
    pub scenes: Vec<SceneSpec>,
}

/// Ground truth of a generated fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureLayout {
    pub frame_count: u32,
    /// First frame of every scene after the first.
    pub scene_starts: Vec<u32>,
    /// Half-open frame windows that contain blended frames.
    pub fade_windows: Vec<(u32, u32)>,
}

impl FixtureSpec {
    fn validate(&self) -> Result<(), IngestError> {
        if self.scenes.is_empty() {
            return Err(IngestError::EmptyFixture);
        }
        if self.width == 0 || self.height == 0 || !self.fps.is_valid() {
            return Err(IngestError::InvalidFixture("zero dimension or fps".into()));
        }
        for (i, s) in self.scenes.iter().enumerate() {
            if !(s.seconds > 0.0 && s.seconds.is_finite()) {
                return Err(IngestError::InvalidFixture(format!("scene {i} duration must be > 0")));
            }
            if let Transition::Fade { seconds } = s.transition {
                if !(seconds > 0.0 && seconds <= s.seconds) {
                    return Err(IngestError::InvalidFixture(format!("scene {i} fade must fit inside the scene")));
                }
            }
        }
        Ok(())
    }

    /// Scene boundaries in frames: scene `i` covers `[bounds[i], bounds[i+1])`.
    fn bounds(&self) -> Vec<u32> {
        let mut out = vec![0u32];
        let mut cum = 0.0;
        for s in &self.scenes {
            cum += s.seconds;
            out.push((cum * self.fps.as_f64()).round() as u32);
        }
        out
    }

    pub fn layout(&self) -> Result<FixtureLayout, IngestError> {
        self.validate()?;
        let bounds = self.bounds();
        let frame_count = *bounds.last().expect("nonempty");
        if frame_count == 0 || bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IngestError::InvalidFixture("a scene is shorter than one frame".into()));
        }
        let mut fade_windows = Vec::new();
        for (i, s) in self.scenes.iter().enumerate() {
            if let (Transition::Fade { seconds }, true) = (s.transition, i + 1 < self.scenes.len()) {
                let len = ((seconds * self.fps.as_f64()).round() as u32).clamp(1, bounds[i + 1] - bounds[i]);
                fade_windows.push((bounds[i + 1] - len, bounds[i + 1]));
            }
        }
        Ok(FixtureLayout { frame_count, scene_starts: bounds[1..bounds.len() - 1].to_vec(), fade_windows })
    }

    fn paint(&self, scene: usize, local: u32, global: u32, bounds: &[u32]) -> RgbFrame {
        let (w, h) = (self.width, self.height);
        match &self.scenes[scene].fill {
            Fill::Solid { rgb } => RgbFrame::filled(w, h, *rgb),
            Fill::Gradient { step } => {
                let mut data = Vec::with_capacity(w as usize * h as usize * 3);
                for y in 0..h {
                    for x in 0..w {
                        let v = ((global as u64 * *step as u64 + x as u64 + y as u64) % 256) as u8;
                        data.extend_from_slice(&[v, v, v]);
                    }
                }
                RgbFrame::new(w, h, data)
            }
            Fill::Split { primary, secondary, from, to, mirrored } => {
                let len = bounds[scene + 1] - bounds[scene];
                let t = if len > 1 { local as f64 / (len - 1) as f64 } else { 0.0 };
                let frac = (from + (to - from) * t).clamp(0.0, 1.0);
                let cols = (frac * w as f64).round() as u32;
                let mut row = Vec::with_capacity(w as usize * 3);
                for x in 0..w {
                    let in_primary = if *mirrored { x >= w - cols } else { x < cols };
                    row.extend_from_slice(if in_primary { primary } else { secondary });
                }
                RgbFrame::new(w, h, row.repeat(h as usize))
            }
        }
    }

    /// Renders frame `index` of the fixture. Pure in `(self, index)`.
    pub fn render(&self, index: u32) -> Result<RgbFrame, IngestError> {
        let layout = self.layout()?;
        self.render_with(&self.bounds(), &layout, index)
    }

    fn render_with(&self, bounds: &[u32], layout: &FixtureLayout, index: u32) -> Result<RgbFrame, IngestError> {
        if index >= layout.frame_count {
            return Err(IngestError::OutOfRange { index, frame_count: layout.frame_count });
        }
        let scene = bounds.partition_point(|&b| b <= index) - 1;
        let base = self.paint(scene, index - bounds[scene], index, bounds);
        let window = layout.fade_windows.iter().find(|(s, e)| (*s..*e).contains(&index));
        let Some(&(ws, we)) = window else {
            return Ok(base);
        };
        let next = self.paint(scene + 1, 0, bounds[scene + 1], bounds);
        Ok(blend(&base, &next, fade_alpha(index - ws, we - ws)))
    }

    pub fn frames(&self) -> Result<impl Iterator<Item = RgbFrame> + '_, IngestError> {
        let layout = self.layout()?;
        let bounds = self.bounds();
        Ok((0..layout.frame_count).map(move |i| self.render_with(&bounds, &layout, i).expect("index in range")))
    }
}

/// Blend weight of the incoming scene at position `j` of an `m`-frame fade.
pub fn fade_alpha(j: u32, m: u32) -> f64 {
    (j + 1) as f64 / (m + 1) as f64
}

pub fn blend(a: &RgbFrame, b: &RgbFrame, alpha: f64) -> RgbFrame {
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x as f64 * (1.0 - alpha) + y as f64 * alpha).round() as u8)
        .collect();
    RgbFrame::new(a.width, a.height, data)
}

/// Renders `spec` into a raw container at `path`.
pub fn generate_fixture(spec: &FixtureSpec, path: &Path) -> Result<FixtureLayout, IngestError> {
    let layout = spec.layout()?;
    write_raw_container(path, spec.width, spec.height, spec.fps, spec.frames()?)?;
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BLACK: [u8; 3] = [0, 0, 0];
    const WHITE: [u8; 3] = [255, 255, 255];

    fn solid(seconds: f64, rgb: [u8; 3], transition: Transition) -> SceneSpec {
        SceneSpec::new(seconds, Fill::Solid { rgb }, transition)
    }

    fn spec(scenes: Vec<SceneSpec>) -> FixtureSpec {
        FixtureSpec { width: 8, height: 4, fps: Fps::integer(30), scenes }
    }

    #[test]
    fn raw_container_metadata_echo() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.rvc");
        generate_fixture(&spec(vec![solid(10.0, BLACK, Transition::Cut)]), &p).unwrap();
        let src = FrameSource::open(&FrameDescriptor::raw(&p)).unwrap();
        assert_eq!(src.frame_count, 300);
        assert_eq!(src.fps, Fps::integer(30));
    }

    #[test]
    fn missing_file_is_unreadable() {
        let err = FrameSource::open(&FrameDescriptor::raw("/nonexistent/x.rvc")).unwrap_err();
        assert!(matches!(err, IngestError::Unreadable { .. }));
    }

    #[test]
    fn zero_frame_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.rvc");
        let mut bytes = RAW_MAGIC.to_vec();
        for v in [4u32, 4, 30, 1, 0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(FrameSource::open(&FrameDescriptor::raw(&p)), Err(IngestError::ZeroFrames(_))));
    }

    #[test]
    fn frame_at_bounds_and_gradient() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.rvc");
        let step = 7u8;
        generate_fixture(&spec(vec![SceneSpec::new(1.0, Fill::Gradient { step }, Transition::Cut)]), &p).unwrap();
        let src = FrameSource::open(&FrameDescriptor::raw(&p)).unwrap();
        assert_eq!(src.frame_at(5).unwrap().frame.pixel(0, 0), [5 * step; 3]);
        assert_eq!(src.frame_at(0).unwrap().frame.pixel(3, 2), [5, 5, 5]);
        assert!(matches!(src.frame_at(30), Err(IngestError::OutOfRange { index: 30, frame_count: 30 })));
    }

    #[test]
    fn hard_cut_fixture() {
        let s = spec(vec![solid(5.0, BLACK, Transition::Cut), solid(5.0, WHITE, Transition::Cut)]);
        let layout = s.layout().unwrap();
        assert_eq!(layout.frame_count, 300);
        assert_eq!(layout.scene_starts, vec![150]);
        assert_eq!(s.render(149).unwrap().pixel(0, 0), BLACK);
        assert_eq!(s.render(150).unwrap().pixel(0, 0), WHITE);
    }

    #[test]
    fn fade_fixture_blends_linearly() {
        let s = spec(vec![solid(3.0, BLACK, Transition::Fade { seconds: 1.0 }), solid(3.0, WHITE, Transition::Cut)]);
        let layout = s.layout().unwrap();
        assert_eq!(layout.fade_windows, vec![(60, 90)]);
        assert_eq!(s.render(59).unwrap().pixel(0, 0), BLACK);
        for j in 0..30u32 {
            // incoming weight (j+1)/31 of white over black
            let expect = (255.0 * (j + 1) as f64 / 31.0).round() as u8;
            assert_eq!(s.render(60 + j).unwrap().pixel(1, 1), [expect; 3], "fade frame {j}");
        }
        assert_eq!(s.render(90).unwrap().pixel(0, 0), WHITE);
    }

    #[test]
    fn empty_spec_is_rejected() {
        assert!(matches!(spec(vec![]).layout(), Err(IngestError::EmptyFixture)));
    }

    #[test]
    fn keyframe_schedule() {
        let fps = Fps::integer(30);
        assert_eq!(per_second_indices(fps, 0, 240).unwrap(), (0..8).map(|k| k * 30).collect::<Vec<_>>());
        assert_eq!(per_second_indices(fps, 10, 55).unwrap(), vec![10]);
        assert_eq!(per_second_indices(fps, 0, 10).unwrap(), vec![0]);
        assert!(per_second_indices(fps, 100, 100).is_err());
        let ntsc = Fps::new(30000, 1001);
        assert_eq!(per_second_indices(ntsc, 0, 300).unwrap()[..4], [0, 30, 60, 90]);
        assert_eq!(per_second_indices(ntsc, 0, 300).unwrap().len(), 10);
    }

    #[test]
    fn split_fill_moves() {
        let s = FixtureSpec {
            width: 10,
            height: 1,
            fps: Fps::integer(10),
            scenes: vec![SceneSpec::new(
                1.1,
                Fill::Split { primary: WHITE, secondary: BLACK, from: 0.0, to: 1.0, mirrored: false },
                Transition::Cut,
            )],
        };
        let count = |f: RgbFrame| f.pixels().filter(|p| *p == WHITE).count();
        assert_eq!(count(s.render(0).unwrap()), 0);
        assert_eq!(count(s.render(5).unwrap()), 5);
        assert_eq!(count(s.render(10).unwrap()), 10);
    }
}
