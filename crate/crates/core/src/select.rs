//! Best-caption selection by matching score, the strong-association gate
//! and selective-rate reporting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::gateway::BackendClient;
use crate::model::{CaptionCandidate, ClipId, RgbFrame, ScoredCaption};

/// Scores above this usually indicate a strong video-text association.
pub const DEFAULT_GATE: f64 = 0.43;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("clip {0} has no candidates")]
    NoCandidates(ClipId),
    #[error("scoring failed for every candidate of clip {clip}: {reasons:?}")]
    ScoringFailed { clip: ClipId, reasons: Vec<String> },
    #[error("no records")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Strong,
    Weak,
}

/// Strong iff the score is strictly above `tau`.
pub fn gate(score: f64, tau: f64) -> Gate {
    if score > tau {
        Gate::Strong
    } else {
        Gate::Weak
    }
}

/// Index of the maximum; ties go to the lowest index.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            Some(b) if *s <= scores[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Index into `scored`.
    pub chosen: usize,
    pub scored: Vec<ScoredCaption>,
}

impl Selection {
    pub fn best(&self) -> &ScoredCaption {
        &self.scored[self.chosen]
    }
}

/// Scores every candidate (concurrently) and picks the argmax. Candidates
/// whose scoring fails are left out; if all fail the clip is parked.
pub fn select_best_with<F>(
    clip_id: &ClipId,
    candidates: &[CaptionCandidate],
    score: F,
) -> Result<Selection, SelectError>
where
    F: Fn(&CaptionCandidate) -> Result<f64, String> + Sync,
{
    if candidates.is_empty() {
        return Err(SelectError::NoCandidates(clip_id.clone()));
    }
    let results: Vec<Result<f64, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = candidates.iter().map(|c| s.spawn(|| score(c))).collect();
        handles.into_iter().map(|h| h.join().expect("scoring thread panicked")).collect()
    });
    let mut scored = Vec::new();
    let mut reasons = Vec::new();
    for (c, r) in candidates.iter().zip(results) {
        match r {
            Ok(s) if s.is_finite() => scored.push(ScoredCaption { candidate: c.clone(), matching_score: s }),
            Ok(s) => reasons.push(format!("{}: non-finite score {s}", c.teacher_id)),
            Err(e) => reasons.push(format!("{}: {e}", c.teacher_id)),
        }
    }
    let scores: Vec<f64> = scored.iter().map(|s| s.matching_score).collect();
    match argmax_first(&scores) {
        Some(chosen) => Ok(Selection { chosen, scored }),
        None => Err(SelectError::ScoringFailed { clip: clip_id.clone(), reasons }),
    }
}

pub fn select_best(
    clip_id: &ClipId,
    candidates: &[CaptionCandidate],
    frames: &[RgbFrame],
    scorer: &BackendClient,
) -> Result<Selection, SelectError> {
    select_best_with(clip_id, candidates, |c| scorer.match_score(frames, &c.text).map_err(|e| e.to_string()))
}

/// Fraction of records each teacher won. Teachers in `roster` appear even
/// with rate 0, in roster order; unknown winners are appended.
pub fn selective_rates<'a, I>(chosen: I, roster: &[String]) -> Result<Vec<(String, f64)>, SelectError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0usize;
    for t in chosen {
        *counts.entry(t).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return Err(SelectError::Empty);
    }
    let mut out: Vec<(String, f64)> = roster
        .iter()
        .map(|t| (t.clone(), counts.get(t.as_str()).copied().unwrap_or(0) as f64 / total as f64))
        .collect();
    for (t, c) in counts {
        if !roster.iter().any(|r| r == t) {
            out.push((t.to_owned(), c as f64 / total as f64));
        }
    }
    Ok(out)
}

/// Fraction of scores gated strong at `tau`.
pub fn strong_fraction(scores: &[f64], tau: f64) -> Result<f64, SelectError> {
    if scores.is_empty() {
        return Err(SelectError::Empty);
    }
    Ok(scores.iter().filter(|&&s| gate(s, tau) == Gate::Strong).count() as f64 / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn cands(n: usize) -> Vec<CaptionCandidate> {
        (0..n)
            .map(|i| CaptionCandidate {
                clip_id: ClipId("c".into()),
                teacher_id: format!("t{i}"),
                text: format!("caption {i}"),
                inputs_used: BTreeSet::new(),
            })
            .collect()
    }

    fn pick(scores: &[f64]) -> usize {
        let c = cands(scores.len());
        select_best_with(&ClipId("c".into()), &c, |cand| {
            let i: usize = cand.teacher_id[1..].parse().unwrap();
            Ok(scores[i])
        })
        .unwrap()
        .chosen
    }

    #[test]
    fn argmax_and_ties() {
        assert_eq!(pick(&[0.2, 0.9, 0.5]), 1);
        assert_eq!(pick(&[0.1]), 0);
        assert_eq!(pick(&[0.7, 0.7]), 0);
    }

    #[test]
    fn gate_is_strict() {
        assert_eq!(gate(0.44, DEFAULT_GATE), Gate::Strong);
        assert_eq!(gate(0.43, DEFAULT_GATE), Gate::Weak);
        assert_eq!(gate(0.10, DEFAULT_GATE), Gate::Weak);
    }

    #[test]
    fn partial_and_total_scoring_failures() {
        let c = cands(3);
        let sel = select_best_with(&ClipId("c".into()), &c, |cand| {
            if cand.teacher_id == "t2" {
                Err("down".into())
            } else {
                Ok(0.5)
            }
        })
        .unwrap();
        assert_eq!(sel.scored.len(), 2);
        let err = select_best_with(&ClipId("c".into()), &c, |_| Err("down".into())).unwrap_err();
        assert!(matches!(err, SelectError::ScoringFailed { .. }));
        assert!(matches!(select_best_with(&ClipId("c".into()), &[], |_| Ok(1.0)), Err(SelectError::NoCandidates(_))));
    }

    #[test]
    fn rates_by_counting() {
        let roster: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let r = selective_rates(["a", "a", "b", "c"], &roster).unwrap();
        assert_eq!(r, vec![("a".into(), 0.5), ("b".into(), 0.25), ("c".into(), 0.25), ("d".into(), 0.0)]);
        let r = selective_rates(["b", "b"], &roster).unwrap();
        assert_eq!(r[1], ("b".into(), 1.0));
        assert!(r.iter().filter(|(t, _)| t != "b").all(|(_, x)| *x == 0.0));
        assert_eq!(selective_rates(std::iter::empty(), &roster), Err(SelectError::Empty));
    }

    #[test]
    fn strong_fraction_counts() {
        assert_eq!(strong_fraction(&[0.5, 0.5, 0.4, 0.2], 0.43).unwrap(), 0.5);
        assert_eq!(strong_fraction(&[0.9; 4], 0.43).unwrap(), 1.0);
        assert_eq!(strong_fraction(&[0.1; 4], 0.43).unwrap(), 0.0);
        assert!(strong_fraction(&[], 0.43).is_err());
    }
}
