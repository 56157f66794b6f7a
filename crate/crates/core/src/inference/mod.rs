//! Clip embedding backends, pooling and instance fusion.
//!
//! Every X3D instance maps a clip of `q` frames to a 192-dimensional vector.
//! A footage is cut with the instance's own clip plan, each clip is embedded,
//! and the clip vectors are averaged into one footage-level vector. Footage
//! vectors from several instances can then be fused by averaging (length
//! stays 192) or by concatenation in canonical `XS < S < M < L` order
//! (length `192 * #instances`).

mod backend;
mod embedding;
mod golden;
mod instance;
mod manifest;
#[cfg(feature = "onnx")]
mod onnx;

use thiserror::Error;

pub use backend::{embed_footage, embed_footage_single, prepare_clip, ModelBackend, StubBackend, StubFunction};
pub use embedding::{fuse, fuse_average, fuse_concat, pool_average, ClipEmbedding, FootageEmbedding, Fusion};
pub use golden::{check_golden, read_golden, write_golden, GoldenHeader, GoldenKind, GoldenReport};
pub use instance::{InstanceName, InstanceSpec, EMBEDDING_DIM};
pub use manifest::{load_backend, sha256_file, ModelManifest};

use crate::preprocess::PreprocessError;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("clip shape mismatch: expected {expected_frames} frames at {expected_resolution}x{expected_resolution}, got {actual_frames} frames at {actual_width}x{actual_height}")]
    ShapeMismatch {
        expected_frames: usize,
        expected_resolution: u32,
        actual_frames: usize,
        actual_width: u32,
        actual_height: u32,
    },
    #[error("nothing to pool or fuse")]
    EmptyInput,
    #[error("clip embeddings come from different instances ({0} and {1})")]
    MixedInstance(InstanceName, InstanceName),
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("instance {0} appears more than once in a fusion")]
    DuplicateInstance(InstanceName),
    #[error("fusion needs at least two instances, got {0}")]
    TooFewInstances(usize),
    #[error("fusion `single` takes exactly one backend, got {0}")]
    SingleNeedsOneBackend(usize),
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("unknown instance `{0}` (expected XS, S, M or L)")]
    UnknownInstance(String),
    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),
    #[error("model load error: {0}")]
    ModelLoad(String),
    #[error("model digest mismatch for {path}: manifest says {expected}, file hashes to {actual}")]
    DigestMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("model run failed: {0}")]
    Run(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Container(#[from] crate::binfmt::ContainerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
