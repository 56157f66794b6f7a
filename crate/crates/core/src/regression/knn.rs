use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{NormalizedCrt, RegressionError};

/// Weight floor for inverse-distance weighting: `w = 1 / max(d, eps)`.
pub const INVERSE_DISTANCE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Manhattan,
    /// `1 - cos(a, b)`. Two zero vectors are at distance 0, a zero vector and
    /// any other vector at distance 1.
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Manhattan, Metric::Cosine];

    pub fn distance(self, a: &[f32], b: &[f32]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| {
                    let d = x as f64 - y as f64;
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).abs()).sum(),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
                for (&x, &y) in a.iter().zip(b) {
                    let (x, y) = (x as f64, y as f64);
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                match (na == 0.0, nb == 0.0) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => 1.0,
                    // |cos| can round past 1; keep the distance non-negative
                    _ => (1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0),
                }
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "manhattan" | "l1" => Ok(Metric::Manhattan),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(format!("unknown metric `{s}` (euclidean, manhattan, cosine)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    InverseDistance,
}

impl Weighting {
    pub const ALL: [Weighting; 2] = [Weighting::Uniform, Weighting::InverseDistance];
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Uniform => "uniform",
            Weighting::InverseDistance => "inverse_distance",
        })
    }
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Ok(Weighting::Uniform),
            "inverse_distance" | "distance" => Ok(Weighting::InverseDistance),
            _ => Err(format!("unknown weighting `{s}` (uniform, inverse-distance)")),
        }
    }
}

/// Fitted instance-based regressor. Holds the training rows verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    dim: usize,
    rows: Vec<f32>,
    targets: Vec<f64>,
    k: usize,
    metric: Metric,
    weighting: Weighting,
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn raw_rows(&self) -> &[f32] {
        &self.rows
    }
}

pub fn knn_fit<R: AsRef<[f32]>>(
    rows: &[R],
    targets: &[NormalizedCrt],
    k: usize,
    metric: Metric,
    weighting: Weighting,
) -> Result<KnnModel, RegressionError> {
    if rows.len() != targets.len() {
        return Err(RegressionError::ArityMismatch {
            rows: rows.len(),
            targets: targets.len(),
        });
    }
    if k == 0 {
        return Err(RegressionError::ZeroK);
    }
    if rows.is_empty() {
        return Err(RegressionError::EmptyTraining);
    }
    if k > rows.len() {
        return Err(RegressionError::KTooLarge { k, rows: rows.len() });
    }
    let dim = rows[0].as_ref().len();
    let mut flat = Vec::with_capacity(dim * rows.len());
    for r in rows {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(RegressionError::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        flat.extend_from_slice(r);
    }
    Ok(KnnModel {
        dim,
        rows: flat,
        targets: targets.iter().map(|t| t.value()).collect(),
        k,
        metric,
        weighting,
    })
}

/// Total order on `(distance, stored index)`; equal distances go to the
/// earlier-stored row.
#[inline]
pub(crate) fn neighbor_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` smallest candidates under [`neighbor_order`], sorted.
pub(crate) fn select_neighbors(mut candidates: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, neighbor_order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(neighbor_order);
    candidates
}

/// Prediction from sorted neighbors.
///
/// Uniform: mean target. Inverse distance: `sum(w y) / sum(w)` with
/// `w = 1 / max(d, eps)`; when some neighbors lie within `eps` of the query
/// the prediction is the mean of those exact matches.
pub(crate) fn aggregate(neighbors: &[(f64, usize)], target: impl Fn(usize) -> f64, weighting: Weighting) -> f64 {
    match weighting {
        Weighting::Uniform => neighbors.iter().map(|&(_, i)| target(i)).sum::<f64>() / neighbors.len() as f64,
        Weighting::InverseDistance => {
            let exact: Vec<usize> = neighbors
                .iter()
                .filter(|(d, _)| *d <= INVERSE_DISTANCE_EPSILON)
                .map(|&(_, i)| i)
                .collect();
            if !exact.is_empty() {
                return exact.iter().map(|&i| target(i)).sum::<f64>() / exact.len() as f64;
            }
            let (num, den) = neighbors.iter().fold((0.0, 0.0), |(num, den), &(d, i)| {
                let w = 1.0 / d.max(INVERSE_DISTANCE_EPSILON);
                (num + w * target(i), den + w)
            });
            num / den
        }
    }
}

/// Predicts the normalized CRT of `query`.
///
/// ```
/// use racecrt::regression::{knn_fit, knn_predict, Metric, NormalizedCrt, Weighting};
///
/// let rows = [[0.0f32], [1.0]];
/// let targets = [NormalizedCrt(0.1), NormalizedCrt(0.9)];
/// let model = knn_fit(&rows, &targets, 1, Metric::Euclidean, Weighting::Uniform)?;
/// assert_eq!(knn_predict(&model, &[0.1])?.value(), 0.1);
/// # Ok::<(), racecrt::regression::RegressionError>(())
/// ```
pub fn knn_predict(model: &KnnModel, query: &[f32]) -> Result<NormalizedCrt, RegressionError> {
    if query.len() != model.dim {
        return Err(RegressionError::DimensionMismatch {
            expected: model.dim,
            actual: query.len(),
        });
    }
    let candidates = (0..model.len())
        .map(|i| (model.metric.distance(query, model.row(i)), i))
        .collect();
    let neighbors = select_neighbors(candidates, model.k);
    Ok(NormalizedCrt(aggregate(&neighbors, |i| model.targets[i], model.weighting)))
}

/// All pairwise distances of a row set under one metric.
///
/// Entry `(i, j)` is exactly `metric.distance(row_i, row_j)`, so predictions
/// read from the cache are bit-identical to [`knn_predict`].
#[derive(Debug, Clone)]
pub struct DistanceCache {
    n: usize,
    metric: Metric,
    dists: Vec<f64>,
}

impl DistanceCache {
    pub fn new<R: AsRef<[f32]> + Sync>(rows: &[R], metric: Metric) -> Self {
        let n = rows.len();
        let dists = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let a = rows[i].as_ref();
                (0..n).map(move |j| metric.distance(a, rows[j].as_ref()))
            })
            .collect();
        Self { n, metric, dists }
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dists[i * self.n + j]
    }
}
