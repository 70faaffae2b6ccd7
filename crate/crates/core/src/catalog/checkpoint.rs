use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CatalogError;
use crate::model::SourceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Split,
    Fanout,
    Select,
    Done,
}

impl Stage {
    pub fn next(self) -> Stage {
        match self {
            Stage::Split => Stage::Fanout,
            Stage::Fanout => Stage::Select,
            Stage::Select | Stage::Done => Stage::Done,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobCheckpoint {
    pub job_id: String,
    /// Stage currently in progress.
    pub stage: Stage,
    /// Last stage each source has fully completed.
    pub cursor: BTreeMap<SourceId, Stage>,
    pub config_hash: String,
}

impl JobCheckpoint {
    pub fn new(job_id: &str, config_hash: &str) -> Self {
        Self {
            job_id: job_id.to_owned(),
            stage: Stage::Split,
            cursor: BTreeMap::new(),
            config_hash: config_hash.to_owned(),
        }
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join("checkpoint.json")
    }

    pub fn done(&self, source: &SourceId, stage: Stage) -> bool {
        self.cursor.get(source).is_some_and(|s| *s >= stage)
    }

    pub fn mark(&mut self, source: &SourceId, stage: Stage) {
        let e = self.cursor.entry(source.clone()).or_insert(stage);
        if stage > *e {
            *e = stage;
        }
    }

    /// Atomic replace: write to a temp file, fsync, rename.
    pub fn save(&self, dir: &Path) -> Result<(), CatalogError> {
        let path = Self::path(dir);
        let tmp = dir.join("checkpoint.json.tmp");
        let body = serde_json::to_vec_pretty(self).map_err(|e| CatalogError::Encode(e.to_string()))?;
        {
            use std::io::Write;
            let mut f = std::fs::File::create(&tmp).map_err(|e| CatalogError::io(&tmp, e))?;
            f.write_all(&body).map_err(|e| CatalogError::io(&tmp, e))?;
            f.sync_all().map_err(|e| CatalogError::io(&tmp, e))?;
        }
        std::fs::rename(&tmp, &path).map_err(|e| CatalogError::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Option<Self>, CatalogError> {
        let path = Self::path(dir);
        match std::fs::read(&path) {
            Ok(b) => serde_json::from_slice(&b).map(Some).map_err(|e| CatalogError::Parse {
                path,
                line: 0,
                message: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CatalogError::io(&path, e)),
        }
    }
}

/// Loads the checkpoint of `job_id` in `dir`, refusing if the effective
/// configuration changed since it was written.
pub fn resume(dir: &Path, job_id: &str, config_hash: &str) -> Result<JobCheckpoint, CatalogError> {
    let cp = JobCheckpoint::load(dir)?.ok_or_else(|| CatalogError::NoCheckpoint(dir.to_owned()))?;
    if cp.job_id != job_id {
        return Err(CatalogError::JobMismatch { expected: job_id.to_owned(), found: cp.job_id });
    }
    if cp.config_hash != config_hash {
        return Err(CatalogError::ConfigChanged { recorded: cp.config_hash, current: config_hash.to_owned() });
    }
    Ok(cp)
}
