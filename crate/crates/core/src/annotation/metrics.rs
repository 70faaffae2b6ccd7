use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotationError, ClipCandidates};
use crate::model::{AnnotationMode, AnnotationResult, AnnotationTask, ClipId, GoodnessMatrix, Selection};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalRecord {
    pub clip_id: ClipId,
    pub positive: String,
    pub hard_negatives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalSplit {
    pub train: Vec<RetrievalRecord>,
    pub val: Vec<RetrievalRecord>,
}

/// Contrastive training data from best-caption results: the chosen caption
/// is the positive, every other candidate of the clip a hard negative.
/// All-Bad results are dropped. The split is a seeded shuffle with
/// `floor(train_fraction * n)` training records.
pub fn export_retrieval_dataset(
    answered: &[(AnnotationTask, AnnotationResult)],
    clips: &[ClipCandidates],
    train_fraction: f64,
    seed: u64,
) -> Result<RetrievalSplit, AnnotationError> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(AnnotationError::Fraction(train_fraction));
    }
    let by_clip: HashMap<&ClipId, &ClipCandidates> = clips.iter().map(|c| (&c.clip_id, c)).collect();
    let mut keyed: Vec<((String, String), RetrievalRecord)> = Vec::new();
    for (task, result) in answered {
        if task.mode != AnnotationMode::BestCaption {
            continue;
        }
        let Selection::Best(chosen) = result.selection else {
            continue;
        };
        let Some(c) = by_clip.get(&task.clip_id) else {
            continue;
        };
        let Some(pos) = c.candidates.get(chosen) else {
            continue;
        };
        let hard_negatives =
            c.candidates.iter().enumerate().filter(|(i, _)| *i != chosen).map(|(_, x)| x.text.clone()).collect();
        keyed.push((
            (task.task_id.clone(), result.annotator_id.clone()),
            RetrievalRecord { clip_id: task.clip_id.clone(), positive: pos.text.clone(), hard_negatives },
        ));
    }
    if keyed.is_empty() {
        return Err(AnnotationError::Empty);
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let mut records: Vec<RetrievalRecord> = keyed.into_iter().map(|(_, r)| r).collect();
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * records.len() as f64) + 1e-9).floor() as usize;
    let val = records.split_off(n_train.min(records.len()));
    Ok(RetrievalSplit { train: records, val })
}

/// annotator -> clip -> best-caption verdict.
pub type Choices = BTreeMap<String, BTreeMap<ClipId, Selection>>;

pub fn best_choices(answered: &[(AnnotationTask, AnnotationResult)]) -> Choices {
    let mut out: Choices = BTreeMap::new();
    for (task, result) in answered.iter().filter(|(t, _)| t.mode == AnnotationMode::BestCaption) {
        out.entry(result.annotator_id.clone()).or_default().insert(task.clip_id.clone(), result.selection.clone());
    }
    out
}

/// Fraction of shared clips with identical choices, averaged over the
/// annotator pairs that share at least one clip.
pub fn agreement_r1(choices: &Choices) -> Result<f64, AnnotationError> {
    let people: Vec<&BTreeMap<ClipId, Selection>> = choices.values().collect();
    let mut rates = Vec::new();
    for i in 0..people.len() {
        for j in i + 1..people.len() {
            let shared: Vec<&ClipId> = people[i].keys().filter(|k| people[j].contains_key(*k)).collect();
            if shared.is_empty() {
                continue;
            }
            let same = shared.iter().filter(|k| people[i][**k] == people[j][**k]).count();
            rates.push(same as f64 / shared.len() as f64);
        }
    }
    if rates.is_empty() {
        return Err(AnnotationError::NoOverlap);
    }
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Fraction of clips where the model's choice is among the captions any
/// annotator picked. Clips nobody annotated are skipped.
pub fn union_r1(model: &BTreeMap<ClipId, usize>, choices: &Choices) -> Result<f64, AnnotationError> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (clip, pick) in model {
        let picked: Vec<&Selection> = choices.values().filter_map(|m| m.get(clip)).collect();
        if picked.is_empty() {
            continue;
        }
        total += 1;
        if picked.iter().any(|s| **s == Selection::Best(*pick)) {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(AnnotationError::NoOverlap);
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport {
    pub matrix: GoodnessMatrix,
    /// Per-model share of clips with a good caption, in roster order.
    pub good_rates: Vec<(String, f64)>,
    /// Share of clips where no model was marked good.
    pub all_bad_rate: f64,
}

/// Clip x model matrix from every-good results. A cell is set when any
/// annotator marked that model's caption good on any page of the clip.
pub fn goodness_matrix(
    roster: &[String],
    clips: &[ClipCandidates],
    answered: &[(AnnotationTask, AnnotationResult)],
) -> Result<GoodnessReport, AnnotationError> {
    let col: HashMap<&str, usize> = roster.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let mut marked: HashMap<&ClipId, BTreeSet<usize>> = HashMap::new();
    for (task, result) in answered.iter().filter(|(t, _)| t.mode == AnnotationMode::EveryGood) {
        let entry = marked.entry(&task.clip_id).or_default();
        if let Selection::Good(set) = &result.selection {
            entry.extend(set.iter().copied());
        }
    }
    let rows: Vec<&ClipCandidates> = clips.iter().filter(|c| marked.contains_key(&c.clip_id)).collect();
    if rows.is_empty() || roster.is_empty() {
        return Err(AnnotationError::Empty);
    }
    let cells: Vec<Vec<bool>> = rows
        .iter()
        .map(|c| {
            let mut row = vec![false; roster.len()];
            for &i in &marked[&c.clip_id] {
                if let Some(&m) = c.candidates.get(i).and_then(|cand| col.get(cand.teacher_id.as_str())) {
                    row[m] = true;
                }
            }
            row
        })
        .collect();
    let matrix = GoodnessMatrix {
        video_ids: rows.iter().map(|c| c.clip_id.to_string()).collect(),
        model_ids: roster.to_vec(),
        cells,
    };
    let v = matrix.videos() as f64;
    let good_rates = roster.iter().enumerate().map(|(m, id)| (id.clone(), matrix.column_sum(m) as f64 / v)).collect();
    let all_bad_rate = matrix.cells.iter().filter(|r| !r.iter().any(|&b| b)).count() as f64 / v;
    Ok(GoodnessReport { matrix, good_rates, all_bad_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CaptionCandidate;

    fn clip(name: &str, n: usize) -> ClipCandidates {
        ClipCandidates {
            clip_id: ClipId(name.into()),
            candidates: (0..n)
                .map(|i| CaptionCandidate {
                    clip_id: ClipId(name.into()),
                    teacher_id: format!("m{}", i + 1),
                    text: format!("{name} caption {i}"),
                    inputs_used: BTreeSet::new(),
                })
                .collect(),
        }
    }

    fn task(clip: &str, mode: AnnotationMode, n: usize) -> AnnotationTask {
        AnnotationTask {
            task_id: format!("{clip}-t"),
            clip_id: ClipId(clip.into()),
            mode,
            caption_order: (0..n).collect(),
            candidate_count: n,
            page_size: 11,
            lease: None,
        }
    }

    fn answer(
        clip: &str,
        mode: AnnotationMode,
        n: usize,
        who: &str,
        sel: Selection,
    ) -> (AnnotationTask, AnnotationResult) {
        let t = task(clip, mode, n);
        let r = AnnotationResult { task_id: t.task_id.clone(), annotator_id: who.into(), selection: sel };
        (t, r)
    }

    #[test]
    fn export_counts_and_negatives() {
        let clips: Vec<_> = (0..10).map(|i| clip(&format!("c{i}"), 8)).collect();
        let answered: Vec<_> = (0..10)
            .map(|i| {
                let sel = if i < 2 { Selection::AllBad } else { Selection::Best(i % 8) };
                answer(&format!("c{i}"), AnnotationMode::BestCaption, 8, "a", sel)
            })
            .collect();
        let split = export_retrieval_dataset(&answered, &clips, 0.8, 1).unwrap();
        assert_eq!((split.train.len(), split.val.len()), (6, 2));
        for r in split.train.iter().chain(&split.val) {
            assert_eq!(r.hard_negatives.len(), 7);
            assert!(!r.hard_negatives.contains(&r.positive));
        }
        assert_eq!(split, export_retrieval_dataset(&answered, &clips, 0.8, 1).unwrap());
        let all_bad: Vec<_> =
            (0..3).map(|i| answer(&format!("c{i}"), AnnotationMode::BestCaption, 8, "a", Selection::AllBad)).collect();
        assert_eq!(export_retrieval_dataset(&all_bad, &clips, 0.8, 1), Err(AnnotationError::Empty));
    }

    #[test]
    fn agreement_nine_of_twenty() {
        let mut choices = Choices::new();
        for i in 0..20 {
            let c = ClipId(format!("c{i}"));
            choices.entry("a".into()).or_default().insert(c.clone(), Selection::Best(0));
            choices.entry("b".into()).or_default().insert(c, Selection::Best(if i < 9 { 0 } else { 1 }));
        }
        assert!((agreement_r1(&choices).unwrap() - 0.45).abs() < 1e-12);
        let model: BTreeMap<ClipId, usize> = (0..20).map(|i| (ClipId(format!("c{i}")), 0)).collect();
        assert_eq!(union_r1(&model, &choices).unwrap(), 1.0);
        let mut apart = Choices::new();
        apart.entry("a".into()).or_default().insert(ClipId("x".into()), Selection::Best(0));
        apart.entry("b".into()).or_default().insert(ClipId("y".into()), Selection::Best(0));
        assert_eq!(agreement_r1(&apart), Err(AnnotationError::NoOverlap));
    }

    #[test]
    fn goodness_or_rule() {
        let roster = vec!["m1".to_string(), "m2".to_string()];
        let clips = vec![clip("c1", 2), clip("c2", 2)];
        let answered = vec![
            answer("c1", AnnotationMode::EveryGood, 2, "a", Selection::Good([0].into())),
            answer("c1", AnnotationMode::EveryGood, 2, "b", Selection::AllBad),
            answer("c2", AnnotationMode::EveryGood, 2, "a", Selection::AllBad),
        ];
        let r = goodness_matrix(&roster, &clips, &answered).unwrap();
        assert_eq!(r.matrix.cells, vec![vec![true, false], vec![false, false]]);
        assert_eq!(r.all_bad_rate, 0.5);
        assert_eq!(r.good_rates, vec![("m1".into(), 0.5), ("m2".into(), 0.0)]);
        assert_eq!(goodness_matrix(&roster, &clips, &[]), Err(AnnotationError::Empty));
    }
}
