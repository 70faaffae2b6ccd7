//! Deterministic synthetic source corpus: hard cuts, multi-angle scenes,
//! cross-fades, static scenes and long takes, with subtitle and metadata
//! sidecars.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{generate_fixture, Fill, FixtureLayout, FixtureSpec, IngestError, SceneSpec, Transition};
use crate::model::{Fps, Subtitle};

pub const CORPUS_WIDTH: u32 = 32;
pub const CORPUS_HEIGHT: u32 = 8;
pub const CORPUS_FPS: Fps = Fps::integer(10);

/// Two-color pairs. Any pixel-level change between colors of different
/// pairs, or between the two colors of one pair, scores above 40 on the
/// HSV content scale, so every scene change is a detectable hard cut.
/// Blending pair 0 into pair 1 position by position (red to green, blue to
/// purple) never wraps hue around zero, so fades between them stay smooth.
const PAIRS: [([u8; 3], [u8; 3], &str); 4] = [
    ([220, 30, 30], [30, 60, 220], "red and blue"),
    ([30, 180, 30], [120, 40, 160], "green and purple"),
    ([255, 255, 255], [128, 128, 128], "white and gray"),
    ([0, 0, 0], [120, 70, 30], "black and brown"),
];

/// Sidecar next to each source: text inputs plus the fixture's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub subtitles: Vec<Subtitle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<FixtureLayout>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Pan,
    MultiAngle,
    Fade,
    Static,
    LongTake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub name: String,
    pub spec: FixtureSpec,
    pub meta: SourceMeta,
    pub segments: Vec<SegmentKind>,
}

struct Builder<'a> {
    rng: &'a mut ChaCha8Rng,
    scenes: Vec<SceneSpec>,
    pair: usize,
    words: Vec<&'static str>,
}

impl Builder<'_> {
    fn next_pair(&mut self) -> ([u8; 3], [u8; 3]) {
        self.pair = (self.pair + 1 + self.rng.random_range(0..PAIRS.len() - 1)) % PAIRS.len();
        let (a, b, w) = PAIRS[self.pair];
        self.words.push(w);
        (a, b)
    }

    fn split(&self, colors: ([u8; 3], [u8; 3]), from: f64, to: f64, mirrored: bool) -> Fill {
        Fill::Split { primary: colors.0, secondary: colors.1, from, to, mirrored }
    }

    fn pan(&mut self) {
        let colors = self.next_pair();
        let seconds = self.rng.random_range(4.0..12.0f64);
        let from = self.rng.random_range(0.3..0.45f64);
        let to = from + self.rng.random_range(0.2..0.3f64);
        let (from, to) = if self.rng.random_bool(0.5) { (from, to) } else { (to, from) };
        let fill = self.split(colors, from, to, false);
        self.scenes.push(SceneSpec::new(round1(seconds), fill, Transition::Cut));
    }

    fn multi_angle(&mut self) {
        let colors = self.next_pair();
        let shots = self.rng.random_range(3..=5);
        let mut f = self.rng.random_range(0.42..0.48f64);
        let step = self.rng.random_range(0.02..0.035f64);
        for k in 0..shots {
            let seconds = self.rng.random_range(2.5..4.0f64);
            let fill = self.split(colors, f, f + step, k % 2 == 1);
            self.scenes.push(SceneSpec::new(round1(seconds), fill, Transition::Cut));
            f += step;
        }
    }

    fn use_pair(&mut self, i: usize) -> ([u8; 3], [u8; 3]) {
        self.pair = i;
        let (a, b, w) = PAIRS[i];
        self.words.push(w);
        (a, b)
    }

    /// Cross-fades between pairs 0 and 1. Blends that start from an
    /// achromatic color, or cross hue zero, jump in hue and read as a cut.
    fn fade(&mut self) {
        let first = if self.pair == 0 {
            1
        } else if self.pair == 1 {
            0
        } else {
            self.rng.random_range(0..2)
        };
        let a = self.use_pair(first);
        let fill = self.split(a, 0.35, 0.6, false);
        self.scenes.push(SceneSpec::new(7.5, fill, Transition::Fade { seconds: 1.0 }));
        let b = self.use_pair(1 - first);
        let seconds = self.rng.random_range(5.0..8.0f64);
        let fill = self.split(b, 0.6, 0.35, false);
        self.scenes.push(SceneSpec::new(round1(seconds), fill, Transition::Cut));
    }

    fn still(&mut self) {
        let (a, _) = self.next_pair();
        let seconds = self.rng.random_range(3.0..6.0f64);
        self.scenes.push(SceneSpec::new(round1(seconds), Fill::Solid { rgb: a }, Transition::Cut));
    }

    fn long_take(&mut self) {
        let colors = self.next_pair();
        let seconds = self.rng.random_range(20.0..45.0f64);
        let fill = self.split(colors, 0.3, 0.7, false);
        self.scenes.push(SceneSpec::new(round1(seconds), fill, Transition::Cut));
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Subtitles on a fixed 4 s cadence, independent of the scene structure.
fn subtitles(total_s: f64, words: &[&str]) -> Vec<Subtitle> {
    let mut out = Vec::new();
    let mut t = 0.5;
    let mut i = 0usize;
    while t + 3.5 <= total_s {
        let w = words.get(i % words.len().max(1)).copied().unwrap_or("colors");
        out.push(Subtitle { start_time: t, end_time: t + 3.5, text: format!("here the {w} regions shift") });
        t += 4.0;
        i += 1;
    }
    out
}

/// Builds item `index` of the corpus for `seed`. Every item covers at least
/// one fade and one static scene among its segments.
pub fn corpus_item(index: usize, seed: u64) -> CorpusItem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let start_pair = rng.random_range(0..PAIRS.len());
    let mut segments = vec![SegmentKind::Pan, SegmentKind::MultiAngle, SegmentKind::Fade, SegmentKind::Static];
    if index.is_multiple_of(3) {
        segments.push(SegmentKind::LongTake);
    }
    for _ in 0..rng.random_range(0..=2) {
        segments.push(if rng.random_bool(0.3) { SegmentKind::Pan } else { SegmentKind::MultiAngle });
    }
    for i in (1..segments.len()).rev() {
        let j = rng.random_range(0..=i);
        segments.swap(i, j);
    }
    let mut b = Builder { rng: &mut rng, scenes: Vec::new(), pair: start_pair, words: Vec::new() };
    for s in &segments {
        match s {
            SegmentKind::Pan => b.pan(),
            SegmentKind::MultiAngle => b.multi_angle(),
            SegmentKind::Fade => b.fade(),
            SegmentKind::Static => b.still(),
            SegmentKind::LongTake => b.long_take(),
        }
    }
    let total: f64 = b.scenes.iter().map(|s| s.seconds).sum();
    let meta = SourceMeta {
        title: Some(format!("Synthetic reel {index}")),
        description: Some(format!("Moving {} color fields", b.words.first().copied().unwrap_or("two"))),
        subtitles: subtitles(total, &b.words),
        layout: None,
    };
    let spec = FixtureSpec { width: CORPUS_WIDTH, height: CORPUS_HEIGHT, fps: CORPUS_FPS, scenes: b.scenes };
    CorpusItem { name: format!("reel_{index:03}"), spec, meta, segments }
}

pub fn corpus(count: usize, seed: u64) -> Vec<CorpusItem> {
    (0..count).map(|i| corpus_item(i, seed)).collect()
}

pub fn meta_path(media: &Path) -> PathBuf {
    media.with_extension("meta.json")
}

/// Writes `<name>.rvc` and `<name>.meta.json` for every item into `dir`.
/// Returns the container paths in corpus order.
pub fn write_corpus(dir: &Path, count: usize, seed: u64) -> Result<Vec<PathBuf>, IngestError> {
    std::fs::create_dir_all(dir).map_err(|e| IngestError::Write { path: dir.to_owned(), source: e })?;
    let mut out = Vec::with_capacity(count);
    for mut item in corpus(count, seed) {
        let path = dir.join(format!("{}.rvc", item.name));
        item.meta.layout = Some(generate_fixture(&item.spec, &path)?);
        let body = serde_json::to_vec_pretty(&item.meta).expect("sidecar serializes");
        let sidecar = meta_path(&path);
        std::fs::write(&sidecar, body).map_err(|e| IngestError::Write { path: sidecar, source: e })?;
        out.push(path);
    }
    Ok(out)
}
