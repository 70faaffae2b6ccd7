//! Deterministic in-process backends speaking the wire protocol.
//!
//! Endpoint syntax: `mock:<kind>[?key=value&...]`. Kinds: `histogram`
//! (embed), `echo` and `empty` (caption), `cosine` (score), `timeout` and
//! `dead` (any role). Parameters: `fail_first=N` times out the first N
//! attempts of every request, `latency_ms=N`, `version=N` (health reply),
//! `wrong_dim=1`, `garbage=1` (non-numeric score), `colors=N` (caption
//! color-word limit).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use parking_lot::Mutex;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::protocol::{decode_pixels, Route, PROTOCOL_VERSION};
use super::{BackendDescriptor, Transport, TransportError};
use crate::model::RgbFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockKind {
    Histogram,
    Echo,
    Empty,
    Cosine,
    Timeout,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockVariant {
    pub kind: MockKind,
    pub fail_first: u32,
    pub latency_ms: u64,
    pub version: u32,
    pub wrong_dim: bool,
    pub garbage: bool,
    pub colors: Option<usize>,
}

impl MockVariant {
    pub fn parse(spec: &str) -> Result<Self, String> {
        let (kind, params) = spec.split_once('?').unwrap_or((spec, ""));
        let kind = match kind {
            "histogram" => MockKind::Histogram,
            "echo" => MockKind::Echo,
            "empty" => MockKind::Empty,
            "cosine" => MockKind::Cosine,
            "timeout" => MockKind::Timeout,
            "dead" => MockKind::Dead,
            other => return Err(format!("unknown mock kind {other:?}")),
        };
        let mut v = MockVariant {
            kind,
            fail_first: 0,
            latency_ms: 0,
            version: PROTOCOL_VERSION,
            wrong_dim: false,
            garbage: false,
            colors: None,
        };
        for kv in params.split('&').filter(|s| !s.is_empty()) {
            let (k, val) = kv.split_once('=').ok_or_else(|| format!("bad mock parameter {kv:?}"))?;
            let num = || val.parse::<u64>().map_err(|e| format!("{k}: {e}"));
            match k {
                "fail_first" => v.fail_first = num()? as u32,
                "latency_ms" => v.latency_ms = num()?,
                "version" => v.version = num()? as u32,
                "wrong_dim" => v.wrong_dim = num()? != 0,
                "garbage" => v.garbage = num()? != 0,
                "colors" => v.colors = Some(num()? as usize),
                _ => return Err(format!("unknown mock parameter {k:?}")),
            }
        }
        Ok(v)
    }
}

/// Instrumentation snapshot of a mock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockStats {
    pub attempts: usize,
    pub distinct_request_ids: usize,
    /// Every attempt carrying a given request id had a byte-identical body.
    pub bodies_consistent: bool,
    pub max_in_flight: usize,
}

#[derive(Default)]
struct Log {
    bodies: BTreeMap<String, (String, u32)>,
    attempts: usize,
    inconsistent: bool,
}

pub struct MockTransport {
    backend_id: String,
    dimension: usize,
    variant: MockVariant,
    log: Mutex<Log>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

struct FlightGuard<'a>(&'a AtomicUsize);

impl Drop for FlightGuard<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl MockTransport {
    pub fn new(descriptor: &BackendDescriptor, variant: MockVariant) -> Self {
        Self {
            backend_id: descriptor.backend_id.clone(),
            dimension: descriptor.dimension.unwrap_or(64),
            variant,
            log: Mutex::new(Log::default()),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
        }
    }

    pub fn stats(&self) -> MockStats {
        let log = self.log.lock();
        MockStats {
            attempts: log.attempts,
            distinct_request_ids: log.bodies.len(),
            bodies_consistent: !log.inconsistent,
            max_in_flight: self.max_in_flight.load(Ordering::SeqCst),
        }
    }

    /// Records the attempt and returns its 1-based ordinal for this request id.
    fn record(&self, body: &Value) -> u32 {
        let id = body.get("request_id").and_then(Value::as_str).unwrap_or_default().to_owned();
        let text = body.to_string();
        let mut log = self.log.lock();
        log.attempts += 1;
        let mut inconsistent = false;
        let entry = log.bodies.entry(id).or_insert_with(|| (text.clone(), 0));
        if entry.0 != text {
            inconsistent = true;
        }
        entry.1 += 1;
        let n = entry.1;
        log.inconsistent |= inconsistent;
        n
    }

    fn frames(body: &Value) -> Result<Vec<RgbFrame>, TransportError> {
        let malformed = |m: &str| TransportError::Malformed(m.to_owned());
        let w = body.get("width").and_then(Value::as_u64).ok_or_else(|| malformed("width"))? as u32;
        let h = body.get("height").and_then(Value::as_u64).ok_or_else(|| malformed("height"))? as u32;
        let list = body.get("frames").and_then(Value::as_array).ok_or_else(|| malformed("frames"))?;
        list.iter()
            .map(|f| decode_pixels(w, h, f.as_str().unwrap_or_default()).map_err(TransportError::Malformed))
            .collect()
    }

    fn flavor(&self) -> &'static str {
        const FLAVORS: [&str; 8] = [
            "a video of",
            "footage showing",
            "a clip featuring",
            "a scene with",
            "an image of",
            "a shot of",
            "a recording of",
            "a view of",
        ];
        let d = Sha256::digest(self.backend_id.as_bytes());
        FLAVORS[d[0] as usize % FLAVORS.len()]
    }

    fn respond(&self, route: Route, body: &Value) -> Result<Value, TransportError> {
        match (self.variant.kind, route) {
            (MockKind::Histogram, Route::Embed) => {
                let w = body.get("width").and_then(Value::as_u64).unwrap_or(0) as u32;
                let h = body.get("height").and_then(Value::as_u64).unwrap_or(0) as u32;
                let pixels = body.get("pixels").and_then(Value::as_str).unwrap_or_default();
                let frame = decode_pixels(w, h, pixels).map_err(TransportError::Malformed)?;
                let dim = self.dimension + usize::from(self.variant.wrong_dim);
                Ok(json!({ "v": PROTOCOL_VERSION, "vector": histogram_embedding(&frame, dim) }))
            }
            (MockKind::Echo, Route::Caption) => {
                let frames = Self::frames(body)?;
                let prompt = body.get("prompt").and_then(Value::as_str).unwrap_or_default();
                let mut colors = color_words(&frames);
                if let Some(n) = self.variant.colors {
                    colors.truncate(n);
                }
                let mut text = format!("{} {}", self.flavor(), colors.join(" and "));
                if let Some(title) = prompt.lines().find_map(|l| l.strip_prefix("Title:")) {
                    text.push_str(" about ");
                    text.push_str(title.trim());
                }
                Ok(json!({ "v": PROTOCOL_VERSION, "text": text }))
            }
            (MockKind::Empty, Route::Caption) => Ok(json!({ "v": PROTOCOL_VERSION, "text": "" })),
            (MockKind::Cosine, Route::Score) => {
                if self.variant.garbage {
                    return Ok(json!({ "v": PROTOCOL_VERSION, "score": "high" }));
                }
                let frames = Self::frames(body)?;
                let caption = body.get("caption").and_then(Value::as_str).unwrap_or_default();
                let label: BTreeSet<String> = color_words(&frames).into_iter().collect();
                Ok(json!({ "v": PROTOCOL_VERSION, "score": token_cosine(caption, &label) }))
            }
            (kind, route) => {
                Err(TransportError::Status { status: 404, body: format!("mock {kind:?} does not serve {route:?}") })
            }
        }
    }
}

impl Transport for MockTransport {
    fn post(&self, route: Route, body: &Value) -> Result<Value, TransportError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = FlightGuard(&self.in_flight);
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        let attempt = self.record(body);
        if self.variant.latency_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.variant.latency_ms));
        }
        match self.variant.kind {
            MockKind::Timeout => return Err(TransportError::Timeout),
            MockKind::Dead => return Err(TransportError::Unreachable("connection refused".into())),
            _ => {}
        }
        if attempt <= self.variant.fail_first {
            return Err(TransportError::Timeout);
        }
        if body.get("v").and_then(Value::as_u64) != Some(PROTOCOL_VERSION as u64) {
            return Err(TransportError::Status { status: 400, body: "missing or unsupported v".into() });
        }
        self.respond(route, body)
    }

    fn health(&self) -> Result<Value, TransportError> {
        if self.variant.kind == MockKind::Dead {
            return Err(TransportError::Unreachable("connection refused".into()));
        }
        Ok(json!({ "v": self.variant.version, "status": "ok" }))
    }
}

/// 4x4x4 RGB color histogram, L2-normalized, padded or truncated to `dim`.
pub fn histogram_embedding(frame: &RgbFrame, dim: usize) -> Vec<f32> {
    let mut counts = [0f64; 64];
    for [r, g, b] in frame.pixels() {
        counts[(r as usize / 64) * 16 + (g as usize / 64) * 4 + b as usize / 64] += 1.0;
    }
    let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut v: Vec<f32> = counts.iter().map(|c| if norm > 0.0 { (c / norm) as f32 } else { 0.0 }).collect();
    v.resize(dim, 0.0);
    v
}

const PALETTE: [(&str, [u8; 3]); 12] = [
    ("black", [0, 0, 0]),
    ("white", [255, 255, 255]),
    ("gray", [128, 128, 128]),
    ("red", [220, 30, 30]),
    ("green", [30, 180, 30]),
    ("blue", [30, 60, 220]),
    ("yellow", [230, 220, 40]),
    ("cyan", [40, 210, 220]),
    ("magenta", [210, 40, 200]),
    ("orange", [240, 140, 20]),
    ("purple", [120, 40, 160]),
    ("brown", [120, 70, 30]),
];

fn nearest_color(p: [u8; 3]) -> usize {
    let d = |c: [u8; 3]| (0..3).map(|i| (p[i] as i32 - c[i] as i32).pow(2)).sum::<i32>();
    (0..PALETTE.len()).min_by_key(|&i| (d(PALETTE[i].1), i)).expect("palette nonempty")
}

/// Names of palette colors covering at least 15% of all pixels, most
/// frequent first.
pub fn color_words(frames: &[RgbFrame]) -> Vec<String> {
    let mut counts = [0usize; PALETTE.len()];
    let mut total = 0usize;
    for f in frames {
        for p in f.pixels() {
            counts[nearest_color(p)] += 1;
            total += 1;
        }
    }
    let mut present: Vec<(usize, usize)> =
        counts.iter().enumerate().filter(|(_, &c)| total > 0 && c * 100 >= total * 15).map(|(i, &c)| (i, c)).collect();
    present.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    present.into_iter().map(|(i, _)| PALETTE[i].0.to_owned()).collect()
}

fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Cosine similarity of two token sets as binary vectors, in [0, 1].
fn token_cosine(caption: &str, label: &BTreeSet<String>) -> f64 {
    let caption = tokens(caption);
    if caption.is_empty() || label.is_empty() {
        return 0.0;
    }
    let shared = caption.intersection(label).count() as f64;
    shared / ((caption.len() * label.len()) as f64).sqrt()
}
