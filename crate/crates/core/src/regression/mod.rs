//! CRT normalization and the k-NN regressor.

mod grid;
mod knn;
mod model_file;
mod normalize;

use thiserror::Error;

pub use grid::{grid_search, inner_fold_assignment, GridCell, GridSearchResult, GridSearchSpec};
pub(crate) use grid::grid_search_indexed;
pub use knn::{knn_fit, knn_predict, DistanceCache, KnnModel, Metric, Weighting, INVERSE_DISTANCE_EPSILON};
pub use model_file::{load_model, save_model, ModelFileHeader};
pub use normalize::{
    fit_normalization, fit_normalization_from, minutes_from_normalized, normalize_crt, NormalizationParams,
    NormalizedCrt,
};

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("normalization population is empty")]
    EmptyPopulation,
    #[error("normalization population has no observation at the first recording point")]
    NoFirstPointObservations,
    #[error("invalid normalization parameters: {0}")]
    InvalidParams(String),
    #[error("{rows} embeddings but {targets} targets")]
    ArityMismatch { rows: usize, targets: usize },
    #[error("k = {k} exceeds the {rows} training rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("k must be >= 1")]
    ZeroK,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training set is empty")]
    EmptyTraining,
    #[error("grid search needs more data: {0}")]
    InsufficientData(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("observation {index}: {message}")]
    Crt { index: usize, message: String },
    #[error(transparent)]
    Container(#[from] crate::binfmt::ContainerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
