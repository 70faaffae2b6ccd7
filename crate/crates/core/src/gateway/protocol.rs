//! JSON wire bodies shared by the HTTP transport and the mocks.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::model::RgbFrame;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Embed,
    Caption,
    Score,
}

impl Route {
    pub fn path(self) -> &'static str {
        match self {
            Route::Embed => "embed",
            Route::Caption => "caption",
            Route::Score => "score",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub v: u32,
    pub request_id: String,
    pub width: u32,
    pub height: u32,
    pub pixels: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub v: u32,
    pub request_id: String,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<String>,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub v: u32,
    pub request_id: String,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<String>,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReply {
    pub v: u32,
    #[serde(default)]
    pub status: String,
}

pub fn encode_pixels(frame: &RgbFrame) -> String {
    STANDARD.encode(&frame.data)
}

pub fn decode_pixels(width: u32, height: u32, b64: &str) -> Result<RgbFrame, String> {
    let data = STANDARD.decode(b64).map_err(|e| format!("bad base64: {e}"))?;
    if data.len() != width as usize * height as usize * 3 {
        return Err(format!("pixel payload of {} bytes does not match {width}x{height}", data.len()));
    }
    Ok(RgbFrame::new(width, height, data))
}

/// Stable request id: a digest of the backend, route and the body without
/// its id, so every retry (and every rerun) carries the same id.
pub fn request_id(backend_id: &str, route: Route, body: &Value) -> String {
    let mut h = Sha256::new();
    h.update(backend_id.as_bytes());
    h.update([0]);
    h.update(route.path().as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(body).expect("json values serialize"));
    hex::encode(&h.finalize()[..16])
}

/// Builds a versioned body with a stable `request_id` from the payload fields.
pub fn versioned_body(backend_id: &str, route: Route, mut payload: serde_json::Map<String, Value>) -> Value {
    payload.insert("v".into(), Value::from(PROTOCOL_VERSION));
    let id = request_id(backend_id, route, &Value::Object(payload.clone()));
    payload.insert("request_id".into(), Value::from(id));
    Value::Object(payload)
}
