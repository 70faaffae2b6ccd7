//! Greedy maximum-coverage selection of a teacher subset from a human
//! "good caption" matrix.
//!
//! The first pick is the model with the most good captions. Every later
//! pick is the model with the most good captions on the videos no earlier
//! pick covers. Ties go to the lowest model index.

use serde::{Deserialize, Serialize};

use crate::model::{GoodnessMatrix, Validate};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PickError {
    #[error("goodness matrix is empty or malformed: {0}")]
    BadMatrix(String),
    #[error("k = {k} outside 1..={models}")]
    KOutOfRange { k: usize, models: usize },
    #[error("unknown model id {0:?}")]
    UnknownModel(String),
}

fn check(matrix: &GoodnessMatrix) -> Result<(), PickError> {
    let v = matrix.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(PickError::BadMatrix(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))
    }
}

/// Models ordered by total good count, descending; ties by index.
fn by_column_sum(matrix: &GoodnessMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..matrix.models()).collect();
    order.sort_by_key(|&m| (std::cmp::Reverse(matrix.column_sum(m)), m));
    order
}

/// Ordered model indices. When no remaining model adds coverage, the
/// remaining slots are filled in global column-sum order.
pub fn greedy_select(matrix: &GoodnessMatrix, k: usize) -> Result<Vec<usize>, PickError> {
    check(matrix)?;
    let m = matrix.models();
    if k < 1 || k > m {
        return Err(PickError::KOutOfRange { k, models: m });
    }
    let mut covered = vec![false; matrix.videos()];
    let mut picked: Vec<usize> = Vec::with_capacity(k);
    while picked.len() < k {
        let mut best: Option<(usize, usize)> = None;
        for model in (0..m).filter(|x| !picked.contains(x)) {
            let gain = matrix.cells.iter().zip(&covered).filter(|(row, &cov)| !cov && row[model]).count();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((model, gain));
            }
        }
        match best {
            Some((model, gain)) if gain > 0 => {
                picked.push(model);
                for (row, cov) in matrix.cells.iter().zip(covered.iter_mut()) {
                    *cov |= row[model];
                }
            }
            _ => break,
        }
    }
    for model in by_column_sum(matrix) {
        if picked.len() == k {
            break;
        }
        if !picked.contains(&model) {
            picked.push(model);
        }
    }
    Ok(picked)
}

/// Fraction of videos with at least one good caption among `subset`.
pub fn coverage(matrix: &GoodnessMatrix, subset: &[usize]) -> f64 {
    if matrix.videos() == 0 {
        return 0.0;
    }
    let hit = matrix.cells.iter().filter(|row| subset.iter().any(|&m| row[m])).count();
    hit as f64 / matrix.videos() as f64
}

pub fn coverage_of_ids(matrix: &GoodnessMatrix, ids: &[String]) -> Result<f64, PickError> {
    let idx = ids
        .iter()
        .map(|id| matrix.model_ids.iter().position(|m| m == id).ok_or_else(|| PickError::UnknownModel(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(coverage(matrix, &idx))
}

/// The model with the highest good rate, and that rate.
pub fn single_best_rate(matrix: &GoodnessMatrix) -> Result<(usize, f64), PickError> {
    check(matrix)?;
    let best = by_column_sum(matrix)[0];
    Ok((best, matrix.column_sum(best) as f64 / matrix.videos() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickReport {
    pub picks: Vec<String>,
    /// Coverage after each pick.
    pub coverage_curve: Vec<f64>,
    pub single_best: (String, f64),
    pub all_models_coverage: f64,
}

pub fn pick_report(matrix: &GoodnessMatrix, k: usize) -> Result<PickReport, PickError> {
    let picks = greedy_select(matrix, k)?;
    let coverage_curve = (1..=picks.len()).map(|n| coverage(matrix, &picks[..n])).collect();
    let (best, rate) = single_best_rate(matrix)?;
    let all: Vec<usize> = (0..matrix.models()).collect();
    Ok(PickReport {
        picks: picks.iter().map(|&i| matrix.model_ids[i].clone()).collect(),
        coverage_curve,
        single_best: (matrix.model_ids[best].clone(), rate),
        all_models_coverage: coverage(matrix, &all),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 4 videos x 3 models; columns m1=[1,1,0,0], m2=[0,0,1,0], m3=[0,1,1,0].
    fn example() -> GoodnessMatrix {
        GoodnessMatrix::from_rows(&[&[1, 0, 0], &[1, 0, 1], &[0, 1, 1], &[0, 0, 0]])
    }

    #[test]
    fn worked_example() {
        assert_eq!(greedy_select(&example(), 2).unwrap(), vec![0, 1]);
        assert_eq!(coverage(&example(), &[0, 1]), 0.75);
        assert_eq!(single_best_rate(&example()).unwrap(), (0, 0.5));
    }

    #[test]
    fn identity_uses_index_ties() {
        let m = GoodnessMatrix::from_rows(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
        assert_eq!(greedy_select(&m, 3).unwrap(), vec![0, 1, 2]);
        let (i, r) = single_best_rate(&m).unwrap();
        assert_eq!(i, 0);
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_zero_falls_back_to_first_model() {
        let m = GoodnessMatrix::from_rows(&[&[0, 0], &[0, 0]]);
        assert_eq!(greedy_select(&m, 1).unwrap(), vec![0]);
        assert_eq!(coverage(&m, &[0]), 0.0);
    }

    #[test]
    fn residual_fill_uses_column_sums() {
        // after m1 covers everything, remaining slots go by column sum: m3 (2) then m2 (1)
        let m = GoodnessMatrix::from_rows(&[&[1, 0, 1], &[1, 1, 1]]);
        assert_eq!(greedy_select(&m, 3).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn all_true_column() {
        let m = GoodnessMatrix::from_rows(&[&[0, 1], &[0, 1]]);
        assert_eq!(single_best_rate(&m).unwrap(), (1, 1.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(greedy_select(&example(), 0), Err(PickError::KOutOfRange { .. })));
        assert!(matches!(greedy_select(&example(), 4), Err(PickError::KOutOfRange { .. })));
        let empty = GoodnessMatrix { video_ids: vec![], model_ids: vec![], cells: vec![] };
        assert!(matches!(greedy_select(&empty, 1), Err(PickError::BadMatrix(_))));
        assert!(single_best_rate(&empty).is_err());
        assert!(matches!(coverage_of_ids(&example(), &["m9".into()]), Err(PickError::UnknownModel(_))));
        assert_eq!(coverage_of_ids(&example(), &[]).unwrap(), 0.0);
    }

    #[test]
    fn report_curve() {
        let r = pick_report(&example(), 3).unwrap();
        assert_eq!(r.picks, vec!["m1", "m2", "m3"]);
        assert_eq!(r.coverage_curve, vec![0.5, 0.75, 0.75]);
        assert_eq!(r.all_models_coverage, 0.75);
    }
}
