use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng::{stream_rng, FOLD_STREAM};

/// Fold assignments for repeated k-fold cross-validation.
///
/// `assignments[r][i]` is the test fold of observation `i` in repetition `r`.
/// Every repetition reshuffles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub repetitions: usize,
    pub folds: usize,
    pub seed: u64,
    pub assignments: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_observations(&self) -> usize {
        self.assignments.first().map_or(0, Vec::len)
    }

    pub fn test_indices(&self, repetition: usize, fold: usize) -> Vec<usize> {
        self.assignments[repetition]
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, repetition: usize, fold: usize) -> Vec<usize> {
        self.assignments[repetition]
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Unstratified plan: each repetition deals a seeded shuffle round-robin.
///
/// ```
/// let plan = racecrt::evaluation::make_fold_plan(456, 20, 10, 7)?;
/// let sizes: Vec<usize> = (0..10).map(|f| plan.test_indices(0, f).len()).collect();
/// assert_eq!(sizes.iter().filter(|&&s| s == 46).count(), 6);
/// assert_eq!(sizes.iter().filter(|&&s| s == 45).count(), 4);
/// # Ok::<(), racecrt::EvalError>(())
/// ```
pub fn make_fold_plan(n: usize, repetitions: usize, folds: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    make_stratified_fold_plan(&vec![0; n], repetitions, folds, seed)
}

/// Plan stratified by `strata[i]` (typically the recording point).
///
/// Each stratum is shuffled on its own, strata are concatenated in ascending
/// order and position `p` of the result goes to fold `p % folds`. Every fold
/// then holds a near-proportional share of each stratum and fold sizes differ
/// by at most one.
pub fn make_stratified_fold_plan(
    strata: &[u32],
    repetitions: usize,
    folds: usize,
    seed: u64,
) -> Result<FoldPlan, EvalError> {
    let n = strata.len();
    if folds < 2 {
        return Err(EvalError::InvalidSpec(format!("folds must be >= 2, got {folds}")));
    }
    if repetitions == 0 {
        return Err(EvalError::InvalidSpec("repetitions must be >= 1".into()));
    }
    if n < folds {
        return Err(EvalError::TooFewObservations { n, folds });
    }
    let mut labels: Vec<u32> = strata.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let assignments = (0..repetitions)
        .map(|r| {
            let mut rng = stream_rng(seed, FOLD_STREAM + r as u64);
            let mut order = Vec::with_capacity(n);
            for &label in &labels {
                let mut members: Vec<usize> = (0..n).filter(|&i| strata[i] == label).collect();
                members.shuffle(&mut rng);
                order.extend(members);
            }
            let mut assignment = vec![0; n];
            for (p, &i) in order.iter().enumerate() {
                assignment[i] = p % folds;
            }
            assignment
        })
        .collect();
    Ok(FoldPlan {
        repetitions,
        folds,
        seed,
        assignments,
    })
}
