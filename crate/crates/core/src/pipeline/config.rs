use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fanout::{TeacherInputs, TeacherKind, TeacherSpec};
use crate::gateway::{BackendDescriptor, Role};
use crate::select::DEFAULT_GATE;
use crate::splitter::SplitterConfig;

pub const DEFAULT_TEACHER_COUNT: usize = 8;

fn default_job_id() -> String {
    "job".into()
}

fn default_gate() -> f64 {
    DEFAULT_GATE
}

fn default_k() -> usize {
    DEFAULT_TEACHER_COUNT
}

/// Everything that determines a run's output. Its hash guards resumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_job_id")]
    pub job_id: String,
    /// Seeds every per-clip random stream.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gate")]
    pub gate: f64,
    /// Teacher subset size for `pick-teachers`.
    #[serde(default = "default_k")]
    pub k: usize,
    pub embed_backend: String,
    pub score_backend: String,
    #[serde(default)]
    pub splitter: SplitterConfig,
    pub backends: Vec<BackendDescriptor>,
    pub roster: Vec<TeacherSpec>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

impl PipelineConfig {
    /// Seeded mock backends: histogram embeddings, four echo teachers that
    /// differ in inputs and detail, and a token-cosine scorer.
    pub fn mock() -> Self {
        let teachers = [
            ("video-vsm", TeacherKind::Video, TeacherInputs::VisionSubtitlesMetadata, "echo"),
            ("video-v", TeacherKind::Video, TeacherInputs::Vision, "echo?colors=1"),
            ("image-v", TeacherKind::Image, TeacherInputs::Vision, "echo"),
            ("video-vs", TeacherKind::Video, TeacherInputs::VisionSubtitles, "echo?colors=1"),
        ];
        let mut backends = vec![
            BackendDescriptor::mock("embed", Role::Embed, "histogram"),
            BackendDescriptor::mock("score", Role::Score, "cosine"),
        ];
        let mut roster = Vec::new();
        for (id, kind, inputs, variant) in teachers {
            backends.push(BackendDescriptor::mock(id, Role::Caption, variant));
            roster.push(TeacherSpec { backend_id: id.into(), kind, inputs });
        }
        Self {
            job_id: default_job_id(),
            seed: 0,
            gate: DEFAULT_GATE,
            k: DEFAULT_TEACHER_COUNT,
            embed_backend: "embed".into(),
            score_backend: "score".into(),
            splitter: SplitterConfig::default(),
            backends,
            roster,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// sha256 of the canonical (key-sorted) JSON form.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }

    pub fn backend(&self, id: &str) -> Option<&BackendDescriptor> {
        self.backends.iter().find(|b| b.backend_id == id)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.splitter.validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.job_id.is_empty() || self.job_id.contains(['/', '\\']) {
            return Err(ConfigError(format!("job_id {:?} is not a plain name", self.job_id)));
        }
        if !(self.gate.is_finite()) {
            return Err(ConfigError("gate must be finite".into()));
        }
        if self.k < 1 {
            return Err(ConfigError("k must be >= 1".into()));
        }
        let mut ids = HashSet::new();
        for b in &self.backends {
            b.validate().map_err(ConfigError)?;
            if !ids.insert(b.backend_id.as_str()) {
                return Err(ConfigError(format!("backend {} declared twice", b.backend_id)));
            }
        }
        let role_of = |id: &str| self.backend(id).map(|b| b.role);
        if role_of(&self.embed_backend) != Some(Role::Embed) {
            return Err(ConfigError(format!("embed_backend {:?} is not an embed backend", self.embed_backend)));
        }
        if role_of(&self.score_backend) != Some(Role::Score) {
            return Err(ConfigError(format!("score_backend {:?} is not a score backend", self.score_backend)));
        }
        if self.roster.is_empty() {
            return Err(ConfigError("roster is empty".into()));
        }
        let mut seen = HashSet::new();
        for t in &self.roster {
            if !seen.insert(t.backend_id.as_str()) {
                return Err(ConfigError(format!("roster lists {} twice", t.backend_id)));
            }
            if role_of(&t.backend_id) != Some(Role::Caption) {
                return Err(ConfigError(format!("roster teacher {} is not a caption backend", t.backend_id)));
            }
        }
        Ok(())
    }
}
