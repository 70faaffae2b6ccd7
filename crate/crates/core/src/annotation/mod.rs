//! Human annotation protocols: task creation with shuffled caption order,
//! an exclusive-lease task store, and the study metrics and exports.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use parking_lot::Mutex;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    AnnotationMode, AnnotationResult, AnnotationTask, CaptionCandidate, ClipId, Lease, Selection, Violation,
    MAX_PAGE_SIZE,
};

pub mod metrics;

pub use metrics::{
    agreement_r1, export_retrieval_dataset, goodness_matrix, union_r1, GoodnessReport, RetrievalRecord, RetrievalSplit,
};

pub const INSTRUCTIONS_EVERY_GOOD: &str = include_str!("../../resources/instructions_every_good.txt");
pub const INSTRUCTIONS_BEST_CAPTION: &str = include_str!("../../resources/instructions_best_caption.txt");

pub const DEFAULT_LEASE_TTL_MS: u64 = 10 * 60 * 1000;

pub fn instructions(mode: AnnotationMode) -> &'static str {
    match mode {
        AnnotationMode::EveryGood => INSTRUCTIONS_EVERY_GOOD.trim_end(),
        AnnotationMode::BestCaption => INSTRUCTIONS_BEST_CAPTION.trim_end(),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotationError {
    #[error("page_size {0} outside 1..=11")]
    PageSize(usize),
    #[error("clip {0} has no candidates")]
    NoCandidates(ClipId),
    #[error("clip {clip} has {count} candidates; best_caption shows all of them on one page of at most {page_size}")]
    TooManyCandidates { clip: ClipId, count: usize, page_size: usize },
    #[error("no task available")]
    PoolExhausted,
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("lease on task {0} is missing, expired or held by someone else")]
    StaleLease(String),
    #[error("annotator already submitted a different result for task {0}")]
    ConflictingResubmit(String),
    #[error("invalid submission: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("no overlapping annotations")]
    NoOverlap,
    #[error("nothing to export or aggregate")]
    Empty,
    #[error("train fraction {0} outside [0, 1]")]
    Fraction(f64),
}

/// A clip and its candidate captions in roster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipCandidates {
    pub clip_id: ClipId,
    pub candidates: Vec<CaptionCandidate>,
}

fn task_rng(clip: &ClipId, mode: AnnotationMode, seed: u64) -> ChaCha8Rng {
    let salt = match mode {
        AnnotationMode::EveryGood => 0x9e37_79b9_7f4a_7c15,
        AnnotationMode::BestCaption => 0xc2b2_ae3d_27d4_eb4f,
    };
    ChaCha8Rng::seed_from_u64(clip.seed() ^ seed ^ salt)
}

fn mode_tag(mode: AnnotationMode) -> &'static str {
    match mode {
        AnnotationMode::EveryGood => "good",
        AnnotationMode::BestCaption => "best",
    }
}

/// Builds annotation tasks. `every_good` shuffles each clip's candidates and
/// cuts them into pages of at most `page_size`; `best_caption` emits one
/// task per clip holding a seeded permutation of all candidates.
pub fn create_tasks(
    clips: &[ClipCandidates],
    mode: AnnotationMode,
    page_size: usize,
    seed: u64,
) -> Result<Vec<AnnotationTask>, AnnotationError> {
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(AnnotationError::PageSize(page_size));
    }
    let mut tasks = Vec::new();
    for clip in clips {
        let n = clip.candidates.len();
        if n == 0 {
            return Err(AnnotationError::NoCandidates(clip.clip_id.clone()));
        }
        if mode == AnnotationMode::BestCaption && n > page_size {
            return Err(AnnotationError::TooManyCandidates { clip: clip.clip_id.clone(), count: n, page_size });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut task_rng(&clip.clip_id, mode, seed));
        for (page, chunk) in order.chunks(page_size).enumerate() {
            tasks.push(AnnotationTask {
                task_id: format!("{}-{}-{page}", clip.clip_id, mode_tag(mode)),
                clip_id: clip.clip_id.clone(),
                mode,
                caption_order: chunk.to_vec(),
                candidate_count: n,
                page_size,
                lease: None,
            });
        }
    }
    Ok(tasks)
}

/// What an annotator's form sends: display positions, not candidate indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub annotator_id: String,
    #[serde(default)]
    pub positions: Vec<usize>,
    #[serde(default)]
    pub all_bad: bool,
}

/// Maps display positions back through the task's permutation.
pub fn resolve(task: &AnnotationTask, sub: &Submission) -> Result<AnnotationResult, AnnotationError> {
    let mut v = Vec::new();
    let mut original = BTreeSet::new();
    for &p in &sub.positions {
        match task.caption_order.get(p) {
            Some(&i) => {
                original.insert(i);
            }
            None => v.push(Violation::new("positions", format!("position {p} out of range"))),
        }
    }
    if original.len() != sub.positions.len() && v.is_empty() {
        v.push(Violation::new("positions", "repeated position"));
    }
    if sub.all_bad && !sub.positions.is_empty() {
        v.push(Violation::new("all_bad", "all_bad together with selected captions"));
    }
    if sub.annotator_id.is_empty() {
        v.push(Violation::new("annotator_id", "empty annotator id"));
    }
    if !v.is_empty() {
        return Err(AnnotationError::Invalid(v));
    }
    let selection = match (sub.all_bad, task.mode) {
        (true, _) => Selection::AllBad,
        (false, AnnotationMode::EveryGood) => Selection::Good(original),
        (false, AnnotationMode::BestCaption) => {
            if original.len() != 1 {
                return Err(AnnotationError::Invalid(vec![Violation::new(
                    "positions",
                    "best_caption takes exactly one position or all_bad",
                )]));
            }
            Selection::Best(*original.iter().next().expect("one element"))
        }
    };
    let result = AnnotationResult { task_id: task.task_id.clone(), annotator_id: sub.annotator_id.clone(), selection };
    let v = result.validate_for(task);
    if v.is_empty() {
        Ok(result)
    } else {
        Err(AnnotationError::Invalid(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmitOutcome {
    Stored,
    Duplicate,
}

#[derive(Debug, Default)]
struct StoreInner {
    tasks: Vec<AnnotationTask>,
    index: HashMap<String, usize>,
    results: BTreeMap<(String, String), AnnotationResult>,
    done: HashMap<String, usize>,
}

impl StoreInner {
    fn available(&self, t: &AnnotationTask, annotator: &str, quota: usize, now_ms: u64) -> bool {
        let leased = t.lease.as_ref().is_some_and(|l| l.expires_at_ms > now_ms);
        !leased
            && self.done.get(&t.task_id).copied().unwrap_or(0) < quota
            && !self.results.contains_key(&(t.task_id.clone(), annotator.to_owned()))
    }
}

/// Task pool with exclusive, expiring leases. All mutation goes through one
/// lock; time is passed in so callers control the clock.
#[derive(Debug)]
pub struct TaskStore {
    inner: Mutex<StoreInner>,
    /// Distinct annotators wanted per task.
    quota: usize,
}

impl TaskStore {
    pub fn new(tasks: Vec<AnnotationTask>, annotators_per_task: usize) -> Self {
        let index = tasks.iter().enumerate().map(|(i, t)| (t.task_id.clone(), i)).collect();
        Self { inner: Mutex::new(StoreInner { tasks, index, ..Default::default() }), quota: annotators_per_task.max(1) }
    }

    pub fn add_tasks(&self, tasks: Vec<AnnotationTask>) {
        let mut g = self.inner.lock();
        for t in tasks {
            if !g.index.contains_key(&t.task_id) {
                let i = g.tasks.len();
                g.index.insert(t.task_id.clone(), i);
                g.tasks.push(t);
            }
        }
    }

    /// Leases a task to `annotator`. An annotator already holding a live
    /// lease gets that task back.
    pub fn lease(&self, annotator: &str, ttl_ms: u64, now_ms: u64) -> Result<AnnotationTask, AnnotationError> {
        let mut g = self.inner.lock();
        if let Some(t) = g
            .tasks
            .iter()
            .find(|t| t.lease.as_ref().is_some_and(|l| l.annotator_id == annotator && l.expires_at_ms > now_ms))
        {
            return Ok(t.clone());
        }
        let pos = g.tasks.iter().position(|t| g.available(t, annotator, self.quota, now_ms));
        let Some(pos) = pos else {
            return Err(AnnotationError::PoolExhausted);
        };
        let t = &mut g.tasks[pos];
        t.lease = Some(Lease { annotator_id: annotator.to_owned(), expires_at_ms: now_ms.saturating_add(ttl_ms) });
        Ok(t.clone())
    }

    pub fn submit(&self, task_id: &str, sub: &Submission, now_ms: u64) -> Result<SubmitOutcome, AnnotationError> {
        let mut g = self.inner.lock();
        let &i = g.index.get(task_id).ok_or_else(|| AnnotationError::UnknownTask(task_id.to_owned()))?;
        let task = g.tasks[i].clone();
        let result = resolve(&task, sub)?;
        let key = (task_id.to_owned(), sub.annotator_id.clone());
        if let Some(prev) = g.results.get(&key) {
            return if *prev == result {
                Ok(SubmitOutcome::Duplicate)
            } else {
                Err(AnnotationError::ConflictingResubmit(task_id.to_owned()))
            };
        }
        let live = task.lease.as_ref().is_some_and(|l| l.annotator_id == sub.annotator_id && l.expires_at_ms > now_ms);
        if !live {
            return Err(AnnotationError::StaleLease(task_id.to_owned()));
        }
        g.results.insert(key, result);
        *g.done.entry(task_id.to_owned()).or_default() += 1;
        g.tasks[i].lease = None;
        Ok(SubmitOutcome::Stored)
    }

    pub fn task(&self, task_id: &str) -> Option<AnnotationTask> {
        let g = self.inner.lock();
        g.index.get(task_id).map(|&i| g.tasks[i].clone())
    }

    pub fn tasks(&self) -> Vec<AnnotationTask> {
        self.inner.lock().tasks.clone()
    }

    /// Stored results in (task_id, annotator_id) order.
    pub fn results(&self) -> Vec<AnnotationResult> {
        self.inner.lock().results.values().cloned().collect()
    }

    /// Results paired with their tasks.
    pub fn answered(&self) -> Vec<(AnnotationTask, AnnotationResult)> {
        let g = self.inner.lock();
        g.results.values().map(|r| (g.tasks[g.index[&r.task_id]].clone(), r.clone())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Validate;

    fn clip(name: &str, n: usize) -> ClipCandidates {
        ClipCandidates {
            clip_id: ClipId(name.into()),
            candidates: (0..n)
                .map(|i| CaptionCandidate {
                    clip_id: ClipId(name.into()),
                    teacher_id: format!("m{}", i + 1),
                    text: format!("caption {i}"),
                    inputs_used: BTreeSet::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn thirty_one_candidates_three_pages() {
        let tasks = create_tasks(&[clip("c", 31)], AnnotationMode::EveryGood, 11, 7).unwrap();
        let sizes: Vec<usize> = tasks.iter().map(|t| t.caption_order.len()).collect();
        assert_eq!(sizes, vec![11, 11, 9]);
        let all: BTreeSet<usize> = tasks.iter().flat_map(|t| t.caption_order.clone()).collect();
        assert_eq!(all, (0..31).collect());
        assert!(tasks.iter().all(|t| t.validate().is_empty()));
    }

    #[test]
    fn best_caption_single_seeded_permutation() {
        let a = create_tasks(&[clip("c", 8)], AnnotationMode::BestCaption, 11, 3).unwrap();
        let b = create_tasks(&[clip("c", 8)], AnnotationMode::BestCaption, 11, 3).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a, b);
        let mut sorted = a[0].caption_order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn page_size_limits() {
        assert_eq!(create_tasks(&[clip("c", 3)], AnnotationMode::EveryGood, 12, 0), Err(AnnotationError::PageSize(12)));
        assert!(matches!(
            create_tasks(&[clip("c", 0)], AnnotationMode::EveryGood, 11, 0),
            Err(AnnotationError::NoCandidates(_))
        ));
    }

    #[test]
    fn lease_exclusive_idempotent_and_expiring() {
        let tasks = create_tasks(&[clip("c", 4)], AnnotationMode::BestCaption, 11, 0).unwrap();
        let store = TaskStore::new(tasks, 1);
        let t1 = store.lease("alice", 1000, 0).unwrap();
        assert_eq!(store.lease("alice", 1000, 10).unwrap().task_id, t1.task_id);
        assert_eq!(store.lease("bob", 1000, 10), Err(AnnotationError::PoolExhausted));
        let t2 = store.lease("bob", 1000, 1000).unwrap();
        assert_eq!(t2.task_id, t1.task_id);
        let sub = Submission { annotator_id: "alice".into(), positions: vec![0], all_bad: false };
        assert_eq!(store.submit(&t1.task_id, &sub, 1001), Err(AnnotationError::StaleLease(t1.task_id.clone())));
    }

    #[test]
    fn submit_maps_positions_to_original_indices() {
        let tasks = create_tasks(&[clip("c", 8)], AnnotationMode::BestCaption, 11, 5).unwrap();
        let order = tasks[0].caption_order.clone();
        let store = TaskStore::new(tasks, 1);
        let t = store.lease("a", 1000, 0).unwrap();
        let sub = Submission { annotator_id: "a".into(), positions: vec![2], all_bad: false };
        assert_eq!(store.submit(&t.task_id, &sub, 1).unwrap(), SubmitOutcome::Stored);
        assert_eq!(store.results()[0].selection, Selection::Best(order[2]));
        assert_eq!(store.submit(&t.task_id, &sub, 2).unwrap(), SubmitOutcome::Duplicate);
        assert_eq!(store.results().len(), 1);
        let other = Submission { annotator_id: "a".into(), positions: vec![3], all_bad: false };
        assert!(matches!(store.submit(&t.task_id, &other, 2), Err(AnnotationError::ConflictingResubmit(_))));
        assert_eq!(store.lease("b", 1000, 3), Err(AnnotationError::PoolExhausted));
    }

    #[test]
    fn contradictory_and_out_of_range_rejected() {
        let tasks = create_tasks(&[clip("c", 5)], AnnotationMode::EveryGood, 11, 0).unwrap();
        let t = &tasks[0];
        let bad = Submission { annotator_id: "a".into(), positions: vec![1], all_bad: true };
        assert!(matches!(resolve(t, &bad), Err(AnnotationError::Invalid(_))));
        let oob = Submission { annotator_id: "a".into(), positions: vec![5], all_bad: false };
        assert!(matches!(resolve(t, &oob), Err(AnnotationError::Invalid(_))));
        let none = Submission { annotator_id: "a".into(), positions: vec![], all_bad: false };
        assert!(matches!(resolve(t, &none), Err(AnnotationError::Invalid(_))));
        let ok = Submission { annotator_id: "a".into(), positions: vec![], all_bad: true };
        assert_eq!(resolve(t, &ok).unwrap().selection, Selection::AllBad);
    }

    #[test]
    fn quota_allows_distinct_annotators() {
        let tasks = create_tasks(&[clip("c", 3)], AnnotationMode::BestCaption, 11, 0).unwrap();
        let store = TaskStore::new(tasks, 2);
        for (i, a) in ["a", "b"].iter().enumerate() {
            let t = store.lease(a, 100, i as u64).unwrap();
            let sub = Submission { annotator_id: (*a).into(), positions: vec![0], all_bad: false };
            store.submit(&t.task_id, &sub, i as u64).unwrap();
        }
        assert_eq!(store.lease("c", 100, 5), Err(AnnotationError::PoolExhausted));
        assert_eq!(store.results().len(), 2);
    }
}
