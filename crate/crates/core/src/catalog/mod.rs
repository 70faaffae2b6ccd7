//! Persistence: the JSONL clip manifest, resumable job checkpoints and
//! dataset statistics.

use std::path::{Path, PathBuf};

use crate::model::{ClipId, Violation};

pub mod checkpoint;
pub mod jsonl;
pub mod manifest;
pub mod stats;

pub use checkpoint::{resume, JobCheckpoint, Stage};
pub use jsonl::{read_jsonl, JsonlWriter};
pub use manifest::{merge_shards, scan, Manifest, ManifestRecord};
pub use stats::{stats, StatsReport};

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("encode: {0}")]
    Encode(String),
    #[error("record {clip_id} is invalid: {}", violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid { clip_id: ClipId, violations: Vec<Violation> },
    #[error("duplicate clip_id {0}")]
    Duplicate(ClipId),
    #[error("no checkpoint in {0}")]
    NoCheckpoint(PathBuf),
    #[error("checkpoint belongs to job {found}, not {expected}")]
    JobMismatch { expected: String, found: String },
    #[error("configuration changed since the checkpoint was written (recorded {recorded}, current {current})")]
    ConfigChanged { recorded: String, current: String },
    #[error("manifest is empty")]
    EmptyManifest,
}

impl CatalogError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CatalogError::Io { path: path.to_owned(), source }
    }
}
