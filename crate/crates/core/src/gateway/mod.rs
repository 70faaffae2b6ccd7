//! Typed clients for the three external model roles: frame embedding,
//! caption generation and video-text matching scores.
//!
//! Every client speaks the same versioned JSON protocol through a
//! [`Transport`]; `mock:<variant>` endpoints resolve to the in-process
//! [`MockTransport`], anything else to HTTP.

mod http;
mod mock;
pub mod protocol;

use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use http::HttpTransport;
pub use mock::{color_words, histogram_embedding, MockStats, MockTransport, MockVariant};
pub use protocol::{Route, PROTOCOL_VERSION};

use crate::model::{Embedding, Keyframe, RgbFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Embed,
    Caption,
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_s: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, backoff_base_s: 0.5 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): `base * 2^(retry-1)`.
    pub fn delay(&self, retry: u32) -> Duration {
        let secs = self.backoff_base_s * 2f64.powi(retry.saturating_sub(1) as i32);
        Duration::from_secs_f64(secs.max(0.0))
    }
}

fn default_timeout() -> f64 {
    120.0
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub role: Role,
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl BackendDescriptor {
    pub fn mock(backend_id: &str, role: Role, variant: &str) -> Self {
        Self {
            backend_id: backend_id.to_owned(),
            role,
            endpoint: format!("mock:{variant}"),
            dimension: (role == Role::Embed).then_some(64),
            timeout_s: default_timeout(),
            max_in_flight: default_in_flight(),
            retry: RetryPolicy { max_attempts: 3, backoff_base_s: 0.0 },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.backend_id.is_empty() {
            return Err("backend_id is empty".into());
        }
        if self.max_in_flight < 1 {
            return Err(format!("{}: max_in_flight must be >= 1", self.backend_id));
        }
        if self.role == Role::Embed && self.dimension.unwrap_or(0) < 1 {
            return Err(format!("{}: embed backends need dimension >= 1", self.backend_id));
        }
        if self.retry.max_attempts < 1 {
            return Err(format!("{}: retry.max_attempts must be >= 1", self.backend_id));
        }
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(format!("{}: timeout_s must be > 0", self.backend_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed reply: {0}")]
    Malformed(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Unreachable(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Malformed(_) => false,
        }
    }
}

/// Moves one JSON request to a backend and returns its JSON reply.
pub trait Transport: Send + Sync {
    fn post(&self, route: Route, body: &Value) -> Result<Value, TransportError>;
    fn health(&self) -> Result<Value, TransportError>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("{backend}: {role:?} call on a backend with a different role")]
    WrongRole { backend: String, role: Role },
    #[error("{backend}: gave up after {attempts} attempt(s): {last}")]
    Exhausted { backend: String, attempts: u32, last: TransportError },
    #[error("{backend}: request failed: {error}")]
    Failed { backend: String, error: TransportError },
    #[error("{backend}: backend contract violation: {reason}")]
    ContractViolation { backend: String, reason: String },
    #[error("{backend}: protocol error: {reason}")]
    Protocol { backend: String, reason: String },
    #[error("{backend}: empty caption")]
    EmptyText { backend: String },
    #[error("unknown backend endpoint {0:?}")]
    BadEndpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum HealthStatus {
    Healthy { latency_ms: f64, version: u32 },
    Unreachable { reason: String },
    Incompatible { version: u32 },
}

/// Counting semaphore bounding in-flight requests of one backend.
#[derive(Debug)]
struct InFlight {
    cap: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(cap: usize) -> Self {
        Self { cap: cap.max(1), used: Mutex::new(0), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock();
        while *used >= self.cap {
            self.freed.wait(&mut used);
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.used.lock() -= 1;
        self.0.freed.notify_one();
    }
}

/// A shareable handle to one backend.
#[derive(Clone)]
pub struct BackendClient {
    descriptor: Arc<BackendDescriptor>,
    transport: Arc<dyn Transport>,
    in_flight: Arc<InFlight>,
}

impl std::fmt::Debug for BackendClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendClient").field("descriptor", &self.descriptor).finish()
    }
}

fn frame_dims(frames: &[RgbFrame]) -> (u32, u32) {
    frames.first().map_or((0, 0), |f| (f.width, f.height))
}

fn frames_field(frames: &[RgbFrame]) -> Value {
    Value::Array(frames.iter().map(|f| Value::from(protocol::encode_pixels(f))).collect())
}

impl BackendClient {
    /// Resolves the descriptor's endpoint to a transport.
    pub fn connect(descriptor: BackendDescriptor) -> Result<Self, BackendError> {
        descriptor
            .validate()
            .map_err(|reason| BackendError::ContractViolation { backend: descriptor.backend_id.clone(), reason })?;
        let transport: Arc<dyn Transport> = if let Some(spec) = descriptor.endpoint.strip_prefix("mock:") {
            let variant =
                MockVariant::parse(spec).map_err(|_| BackendError::BadEndpoint(descriptor.endpoint.clone()))?;
            Arc::new(MockTransport::new(&descriptor, variant))
        } else if descriptor.endpoint.starts_with("http://") || descriptor.endpoint.starts_with("https://") {
            Arc::new(HttpTransport::new(&descriptor.endpoint, Duration::from_secs_f64(descriptor.timeout_s)))
        } else {
            return Err(BackendError::BadEndpoint(descriptor.endpoint.clone()));
        };
        Ok(Self::with_transport(descriptor, transport))
    }

    pub fn with_transport(descriptor: BackendDescriptor, transport: Arc<dyn Transport>) -> Self {
        let in_flight = Arc::new(InFlight::new(descriptor.max_in_flight));
        Self { descriptor: Arc::new(descriptor), transport, in_flight }
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub fn id(&self) -> &str {
        &self.descriptor.backend_id
    }

    fn require(&self, role: Role) -> Result<(), BackendError> {
        if self.descriptor.role != role {
            return Err(BackendError::WrongRole { backend: self.id().to_owned(), role });
        }
        Ok(())
    }

    /// Sends `body` under the in-flight cap, retrying transient failures with
    /// exponential backoff. The body (and its request id) never changes
    /// between attempts.
    fn call(&self, route: Route, body: &Value) -> Result<Value, BackendError> {
        let _permit = self.in_flight.acquire();
        let policy = self.descriptor.retry;
        let mut attempt = 1;
        loop {
            match self.transport.post(route, body) {
                Ok(v) => return Ok(v),
                Err(e) if e.retryable() && attempt < policy.max_attempts => {
                    log::debug!("{}: attempt {attempt} failed ({e}), retrying", self.id());
                    std::thread::sleep(policy.delay(attempt));
                    attempt += 1;
                }
                Err(e) if e.retryable() => {
                    return Err(BackendError::Exhausted { backend: self.id().to_owned(), attempts: attempt, last: e })
                }
                Err(e) => return Err(BackendError::Failed { backend: self.id().to_owned(), error: e }),
            }
        }
    }

    fn protocol(&self, reason: impl Into<String>) -> BackendError {
        BackendError::Protocol { backend: self.id().to_owned(), reason: reason.into() }
    }

    pub fn embed_frame(&self, keyframe: &Keyframe) -> Result<Embedding, BackendError> {
        self.require(Role::Embed)?;
        let f = &keyframe.frame;
        let mut payload = Map::new();
        payload.insert("width".into(), f.width.into());
        payload.insert("height".into(), f.height.into());
        payload.insert("pixels".into(), protocol::encode_pixels(f).into());
        let body = protocol::versioned_body(self.id(), Route::Embed, payload);
        let reply = self.call(Route::Embed, &body)?;
        let vector: Vec<f32> = reply
            .get("vector")
            .and_then(Value::as_array)
            .ok_or_else(|| self.protocol("reply has no vector"))?
            .iter()
            .map(|x| x.as_f64().map(|x| x as f32))
            .collect::<Option<_>>()
            .ok_or_else(|| self.protocol("vector has non-numeric entries"))?;
        let expected = self.descriptor.dimension.unwrap_or(0);
        if vector.len() != expected {
            return Err(BackendError::ContractViolation {
                backend: self.id().to_owned(),
                reason: format!("vector length {} != declared dimension {expected}", vector.len()),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(BackendError::ContractViolation {
                backend: self.id().to_owned(),
                reason: "non-finite vector entry".into(),
            });
        }
        Ok(Embedding::new(self.id(), vector))
    }

    /// Returns the raw caption text; empty text is an error.
    pub fn caption(&self, frames: &[RgbFrame], prompt: &str) -> Result<String, BackendError> {
        self.require(Role::Caption)?;
        let (w, h) = frame_dims(frames);
        let mut payload = Map::new();
        payload.insert("width".into(), w.into());
        payload.insert("height".into(), h.into());
        payload.insert("frames".into(), frames_field(frames));
        payload.insert("prompt".into(), prompt.into());
        let body = protocol::versioned_body(self.id(), Route::Caption, payload);
        let reply = self.call(Route::Caption, &body)?;
        let text = reply.get("text").and_then(Value::as_str).ok_or_else(|| self.protocol("reply has no text"))?;
        let text = text.trim();
        if text.is_empty() {
            return Err(BackendError::EmptyText { backend: self.id().to_owned() });
        }
        Ok(text.to_owned())
    }

    pub fn match_score(&self, frames: &[RgbFrame], caption: &str) -> Result<f64, BackendError> {
        self.require(Role::Score)?;
        let (w, h) = frame_dims(frames);
        let mut payload = Map::new();
        payload.insert("width".into(), w.into());
        payload.insert("height".into(), h.into());
        payload.insert("frames".into(), frames_field(frames));
        payload.insert("caption".into(), caption.into());
        let body = protocol::versioned_body(self.id(), Route::Score, payload);
        let reply = self.call(Route::Score, &body)?;
        let score = reply
            .get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| self.protocol("score is missing or not a number"))?;
        if !score.is_finite() {
            return Err(self.protocol("score is not finite"));
        }
        Ok(score)
    }

    pub fn health_check(&self) -> HealthStatus {
        let t0 = Instant::now();
        match self.transport.health() {
            Ok(reply) => {
                let version = reply.get("v").and_then(Value::as_u64).unwrap_or(0) as u32;
                if version != PROTOCOL_VERSION {
                    HealthStatus::Incompatible { version }
                } else {
                    HealthStatus::Healthy { latency_ms: t0.elapsed().as_secs_f64() * 1e3, version }
                }
            }
            Err(e) => HealthStatus::Unreachable { reason: e.to_string() },
        }
    }
}
