use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::jsonl::{read_jsonl, JsonlWriter};
use super::CatalogError;
use crate::model::{
    CaptionCandidate, ClipId, ClipRecord, ClipState, Fps, InputKind, ScoredCaption, SourceId, Validate, Violation,
};
use crate::select::Gate;

/// One kept clip with its chosen caption. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub clip_id: ClipId,
    pub source_id: SourceId,
    pub start_frame: u32,
    pub end_frame: u32,
    pub fps: Fps,
    pub caption: String,
    pub teacher_id: String,
    pub matching_score: f64,
    pub gate: Gate,
    pub inputs_used: BTreeSet<InputKind>,
}

impl ManifestRecord {
    pub fn clip(&self) -> ClipRecord {
        let mut c =
            ClipRecord::new(self.source_id.clone(), self.start_frame, self.end_frame, self.fps, ClipState::Kept);
        c.clip_id = self.clip_id.clone();
        c
    }

    pub fn duration_seconds(&self) -> f64 {
        self.fps.seconds(self.end_frame.saturating_sub(self.start_frame) as u64)
    }
}

impl Validate for ManifestRecord {
    fn validate(&self) -> Vec<Violation> {
        let mut out = self.clip().validate();
        let scored = ScoredCaption {
            candidate: CaptionCandidate {
                clip_id: self.clip_id.clone(),
                teacher_id: self.teacher_id.clone(),
                text: self.caption.clone(),
                inputs_used: self.inputs_used.clone(),
            },
            matching_score: self.matching_score,
        };
        out.extend(scored.validate().into_iter().map(|v| {
            let path = v.path.strip_prefix("candidate.").unwrap_or(&v.path);
            Violation::new(if path == "text" { "caption" } else { path }, v.message)
        }));
        out
    }
}

/// Append-only manifest with clip_id uniqueness.
pub struct Manifest {
    writer: JsonlWriter<ManifestRecord>,
    ids: HashSet<ClipId>,
}

impl Manifest {
    pub fn open(path: &Path) -> Result<Self, CatalogError> {
        let writer = JsonlWriter::open(path, true)?;
        let ids = read_jsonl::<ManifestRecord>(path)?.into_iter().map(|r| r.clip_id).collect();
        Ok(Self { writer, ids })
    }

    pub fn contains(&self, id: &ClipId) -> bool {
        self.ids.contains(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn append(&mut self, record: &ManifestRecord) -> Result<(), CatalogError> {
        let violations = record.validate();
        if !violations.is_empty() {
            return Err(CatalogError::Invalid { clip_id: record.clip_id.clone(), violations });
        }
        if self.ids.contains(&record.clip_id) {
            return Err(CatalogError::Duplicate(record.clip_id.clone()));
        }
        self.writer.write(record)?;
        self.ids.insert(record.clip_id.clone());
        Ok(())
    }

    pub fn path(&self) -> &Path {
        self.writer.path()
    }
}

pub fn scan(path: &Path) -> Result<Vec<ManifestRecord>, CatalogError> {
    read_jsonl(path)
}

/// Concatenates manifest shards and writes them sorted by clip_id.
pub fn merge_shards(shards: &[PathBuf], out: &Path) -> Result<usize, CatalogError> {
    let mut all = Vec::new();
    for s in shards {
        all.extend(scan(s)?);
    }
    all.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    let tmp = out.with_extension("jsonl.tmp");
    let _ = std::fs::remove_file(&tmp);
    {
        let mut m = Manifest::open(&tmp)?;
        for r in &all {
            m.append(r)?;
        }
    }
    std::fs::rename(&tmp, out).map_err(|e| CatalogError::io(out, e))?;
    Ok(all.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::Gate;

    fn rec(start: u32, end: u32) -> ManifestRecord {
        let src = SourceId("s".into());
        ManifestRecord {
            clip_id: ClipId::derive(&src, start, end),
            source_id: src,
            start_frame: start,
            end_frame: end,
            fps: Fps::integer(10),
            caption: "a red square".into(),
            teacher_id: "t1".into(),
            matching_score: 0.61,
            gate: Gate::Strong,
            inputs_used: [InputKind::Vision].into(),
        }
    }

    #[test]
    fn field_order_is_stable() {
        let line = serde_json::to_string(&rec(0, 30)).unwrap();
        let keys = [
            "clip_id",
            "source_id",
            "start_frame",
            "end_frame",
            "fps",
            "caption",
            "teacher_id",
            "matching_score",
            "gate",
            "inputs_used",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| line.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{line}");
    }

    #[test]
    fn append_scan_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        let mut m = Manifest::open(&p).unwrap();
        m.append(&rec(0, 30)).unwrap();
        m.append(&rec(30, 80)).unwrap();
        assert!(matches!(m.append(&rec(0, 30)), Err(CatalogError::Duplicate(_))));
        let mut bad = rec(0, 5);
        bad.caption = " ".into();
        match m.append(&bad) {
            Err(CatalogError::Invalid { violations, .. }) => assert!(violations.len() >= 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(scan(&p).unwrap(), vec![rec(0, 30), rec(30, 80)]);
        drop(m);
        assert_eq!(Manifest::open(&p).unwrap().len(), 2);
    }

    #[test]
    fn torn_tail_is_dropped_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        Manifest::open(&p).unwrap().append(&rec(0, 30)).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.extend_from_slice(b"{\"clip_id\":\"ab");
        std::fs::write(&p, &bytes).unwrap();
        assert_eq!(scan(&p).unwrap().len(), 1);
        let mut m = Manifest::open(&p).unwrap();
        m.append(&rec(30, 80)).unwrap();
        assert_eq!(scan(&p).unwrap(), vec![rec(0, 30), rec(30, 80)]);
    }

    #[test]
    fn shards_merge_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        Manifest::open(&a).unwrap().append(&rec(0, 30)).unwrap();
        Manifest::open(&b).unwrap().append(&rec(30, 80)).unwrap();
        let out = dir.path().join("all.jsonl");
        assert_eq!(merge_shards(&[b.clone(), a.clone()], &out).unwrap(), 2);
        let ids: Vec<_> = scan(&out).unwrap().into_iter().map(|r| r.clip_id).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }
}
