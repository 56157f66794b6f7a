use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::knn::{aggregate, select_neighbors, DistanceCache, Metric, Weighting};
use super::{NormalizedCrt, RegressionError};
use crate::rng::stream_rng;

/// Hyper-parameter grid for the k-NN regressor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSearchSpec {
    pub k_grid: Vec<usize>,
    pub metric_grid: Vec<Metric>,
    pub weighting_grid: Vec<Weighting>,
    pub inner_folds: usize,
}

impl Default for GridSearchSpec {
    fn default() -> Self {
        Self {
            k_grid: vec![1, 3, 5, 7, 9, 11, 15, 21],
            metric_grid: Metric::ALL.to_vec(),
            weighting_grid: Weighting::ALL.to_vec(),
            inner_folds: 5,
        }
    }
}

impl GridSearchSpec {
    pub fn validate(&self) -> Result<(), RegressionError> {
        if self.k_grid.is_empty() || self.metric_grid.is_empty() || self.weighting_grid.is_empty() {
            return Err(RegressionError::InvalidGrid("every grid axis needs at least one value".into()));
        }
        if self.k_grid.contains(&0) {
            return Err(RegressionError::InvalidGrid("k values must be >= 1".into()));
        }
        if self.inner_folds < 2 {
            return Err(RegressionError::InvalidGrid("inner_folds must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub k: usize,
    pub metric: Metric,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GridCell,
    pub best_mae: f64,
    /// Mean inner-fold MAE per evaluated cell, in canonical cell order.
    pub table: Vec<(GridCell, f64)>,
}

/// Fold id of each of `n` positions: a seeded shuffle dealt round-robin.
pub fn inner_fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let mut assignment = vec![0; n];
    for (rank, &pos) in order.iter().enumerate() {
        assignment[pos] = rank % folds;
    }
    assignment
}

/// Picks the cell with the lowest mean inner-fold MAE.
///
/// Inner folds are `min(inner_folds, n)`; cells whose `k` exceeds the
/// smallest inner training set are skipped. Ties go to the smaller `k`, then
/// metric order (euclidean, manhattan, cosine), then uniform before inverse
/// distance, so the pick does not depend on how the grid is enumerated.
pub fn grid_search<R: AsRef<[f32]> + Sync>(
    spec: &GridSearchSpec,
    rows: &[R],
    targets: &[NormalizedCrt],
    seed: u64,
) -> Result<GridSearchResult, RegressionError> {
    if rows.len() != targets.len() {
        return Err(RegressionError::ArityMismatch {
            rows: rows.len(),
            targets: targets.len(),
        });
    }
    if let Some(first) = rows.first() {
        let dim = first.as_ref().len();
        if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != dim) {
            return Err(RegressionError::DimensionMismatch {
                expected: dim,
                actual: bad.as_ref().len(),
            });
        }
    }
    let metrics: BTreeSet<Metric> = spec.metric_grid.iter().copied().collect();
    let caches: Vec<DistanceCache> = metrics.into_iter().map(|m| DistanceCache::new(rows, m)).collect();
    let subset: Vec<usize> = (0..rows.len()).collect();
    let ys: Vec<f64> = targets.iter().map(|t| t.value()).collect();
    grid_search_indexed(spec, &caches, &subset, &ys, seed)
}

/// Grid search over the rows `subset` of precomputed distance caches.
/// `targets[p]` belongs to `subset[p]`; `subset` must be ascending so that
/// distance ties resolve as they would in a model fitted on those rows.
pub(crate) fn grid_search_indexed(
    spec: &GridSearchSpec,
    caches: &[DistanceCache],
    subset: &[usize],
    targets: &[f64],
    seed: u64,
) -> Result<GridSearchResult, RegressionError> {
    spec.validate()?;
    let n = subset.len();
    if n < 2 {
        return Err(RegressionError::InsufficientData(format!("{n} rows, need at least 2")));
    }
    let folds = spec.inner_folds.min(n);
    let assignment = inner_fold_assignment(n, folds, seed);
    let min_train = n - n.div_ceil(folds);

    let ks: Vec<usize> = spec
        .k_grid
        .iter()
        .copied()
        .filter(|&k| k <= min_train)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ks.is_empty() {
        return Err(RegressionError::InsufficientData(format!(
            "smallest inner training set has {min_train} rows, below every k in the grid"
        )));
    }
    let k_max = *ks.last().unwrap();
    let metrics: BTreeSet<Metric> = spec.metric_grid.iter().copied().collect();
    let weightings: Vec<Weighting> = spec
        .weighting_grid
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut table = Vec::new();
    for metric in metrics {
        let cache = caches
            .iter()
            .find(|c| c.metric() == metric)
            .ok_or_else(|| RegressionError::InvalidGrid(format!("no distance cache for {metric}")))?;
        // fold_sums[ki][wi] accumulates per-fold MAEs
        let mut fold_sums = vec![vec![0.0f64; weightings.len()]; ks.len()];
        for fold in 0..folds {
            let train: Vec<usize> = (0..n).filter(|&p| assignment[p] != fold).collect();
            let test: Vec<usize> = (0..n).filter(|&p| assignment[p] == fold).collect();
            let mut errors = vec![vec![0.0f64; weightings.len()]; ks.len()];
            for &q in &test {
                let candidates = train.iter().map(|&p| (cache.get(subset[q], subset[p]), p)).collect();
                let neighbors = select_neighbors(candidates, k_max);
                for (ki, &k) in ks.iter().enumerate() {
                    for (wi, &w) in weightings.iter().enumerate() {
                        let pred = aggregate(&neighbors[..k], |p| targets[p], w);
                        errors[ki][wi] += (pred - targets[q]).abs();
                    }
                }
            }
            for (ki, row) in errors.iter().enumerate() {
                for (wi, e) in row.iter().enumerate() {
                    fold_sums[ki][wi] += e / test.len() as f64;
                }
            }
        }
        for (ki, &k) in ks.iter().enumerate() {
            for (wi, &weighting) in weightings.iter().enumerate() {
                table.push((GridCell { k, metric, weighting }, fold_sums[ki][wi] / folds as f64));
            }
        }
    }
    table.sort_by_key(|e| e.0);
    let &(best, best_mae) = table
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("table is non-empty");
    Ok(GridSearchResult { best, best_mae, table })
}
