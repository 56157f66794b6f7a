//! Cumulative race time (CRT) estimation from short runner footage.
//!
//! The pipeline has two halves. Pre-processing stills the background behind
//! the runner of interest and cuts the footage into strided clips; the
//! regression half turns pooled clip embeddings into a normalized CRT with an
//! instance-based (k-NN) regressor, evaluated by repeated k-fold
//! cross-validation.
//!
//! ```text
//! footage + tracks -> context constrain -> clip plan -> backend(s) -> pool -> fuse -> k-NN
//! ```
//!
//! Modules map onto those stages:
//!
//! - [`domain`]: runners, recording points, passing times, manifests, CRT arithmetic.
//! - [`preprocess`]: frames, track boxes, background plates, context constrain, clip plans.
//! - [`inference`]: instance geometry, model backends, pooling and fusion.
//! - [`regression`]: CRT normalization, k-NN regressor, grid search.
//! - [`evaluation`]: MAE, fold plans, cross-validation, synthetic data, report tables.
//! - [`store`]: on-disk embedding stores.
//!
//! A deterministic stub backend ships with the crate so the whole pipeline runs
//! without model files:
//!
//! ```
//! use racecrt::inference::{embed_footage, Fusion, InstanceName, InstanceSpec, ModelBackend, StubBackend, StubFunction};
//! use racecrt::preprocess::Frame;
//!
//! let spec = InstanceSpec::new(InstanceName::XS, 8);
//! let backend = StubBackend::new(spec, StubFunction::Constant(0.25));
//! let footage = vec![Frame::new(8, 8); 175];
//! let backends: Vec<&dyn ModelBackend> = vec![&backend];
//! let embedding = embed_footage(&backends, &footage, Fusion::Single)?;
//! assert_eq!(embedding.values.len(), 192);
//! assert!(embedding.values.iter().all(|&v| v == 0.25));
//! # Ok::<(), racecrt::inference::InferenceError>(())
//! ```

pub mod binfmt;
pub mod domain;
pub mod evaluation;
pub mod inference;
pub mod preprocess;
pub mod regression;
pub mod store;

mod rng;

pub use domain::{
    compute_crt, load_manifest, save_manifest, CrtSeconds, DatasetManifest, DomainError,
    Observation, PassingTime, RecordingPointId, RunnerId,
};
pub use evaluation::{mae, run_cv, CvDataset, CvOptions, EvalError, EvalReport, FoldPlan};
pub use inference::{FootageEmbedding, Fusion, InstanceName, InstanceSpec, EMBEDDING_DIM};
pub use regression::{
    knn_fit, knn_predict, normalize_crt, GridSearchSpec, KnnModel, Metric, NormalizationParams,
    NormalizedCrt, Weighting,
};
pub use store::EmbeddingStore;
