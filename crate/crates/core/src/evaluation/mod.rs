//! MAE, repeated k-fold cross-validation, synthetic datasets and report tables.

mod cv;
mod folds;
mod metrics;
mod report;
mod synthetic;

use thiserror::Error;

pub use cv::{
    fit_final_model, run_cv, run_cv_with_plan, CvDataset, CvOptions, EvalReport, EvalScope, FoldSelection, NormalizationMode,
};
pub use folds::{make_fold_plan, make_stratified_fold_plan, FoldPlan};
pub use metrics::{mae, sample_std};
pub use report::{report_label, report_table, ReportFormat};
pub use synthetic::{gen_synthetic, write_synthetic_footage, FootageSpec, StubFamily, SyntheticSpec};

use crate::domain::{DomainError, RecordingPointId, RunnerId};
use crate::regression::RegressionError;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {truths} truths")]
    ArityMismatch { predictions: usize, truths: usize },
    #[error("no values to average")]
    EmptyInput,
    #[error("{n} observations cannot fill {folds} folds")]
    TooFewObservations { n: usize, folds: usize },
    #[error("no embedding for runner {runner} at recording point {rp} in the {instance} store")]
    MissingEmbedding {
        runner: RunnerId,
        rp: RecordingPointId,
        instance: String,
    },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Preprocess(#[from] crate::preprocess::PreprocessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
