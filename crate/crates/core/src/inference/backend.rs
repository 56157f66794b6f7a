use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fuse, pool_average, ClipEmbedding, FootageEmbedding, Fusion, InferenceError, InstanceSpec};
use crate::preprocess::{extract_clip_frames, plan_clips, resize_frame, Frame};

/// Maps a clip of `q` frames at the instance's input resolution to one vector.
///
/// Implementations are immutable once loaded and may be called from many
/// threads at once.
pub trait ModelBackend: Send + Sync {
    fn instance(&self) -> &InstanceSpec;

    /// Trainable parameter count as read from the model graph (0 for stubs).
    fn param_count(&self) -> u64;

    fn embed_clip(&self, clip: &[Frame]) -> Result<ClipEmbedding, InferenceError>;

    fn check_clip_shape(&self, clip: &[Frame]) -> Result<(), InferenceError> {
        let spec = self.instance();
        let side = spec.input_resolution;
        let bad = clip.iter().find(|f| f.dimensions() != (side, side));
        if clip.len() != spec.frames_per_clip || bad.is_some() {
            let (actual_width, actual_height) = bad
                .or(clip.first())
                .map(|f| f.dimensions())
                .unwrap_or((0, 0));
            return Err(InferenceError::ShapeMismatch {
                expected_frames: spec.frames_per_clip,
                expected_resolution: side,
                actual_frames: clip.len(),
                actual_width,
                actual_height,
            });
        }
        Ok(())
    }
}

/// Pixel statistic computed by [`StubBackend`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubFunction {
    /// Mean of all channel values of the clip, scaled to `[0, 1]`, repeated.
    MeanIntensity,
    /// Coordinate `j` holds the mean of channel `j % 3`, scaled to `[0, 1]`.
    ChannelMeans,
    /// Every coordinate equals the given value.
    Constant(f32),
}

/// Deterministic backend with no model file.
#[derive(Debug, Clone)]
pub struct StubBackend {
    spec: InstanceSpec,
    function: StubFunction,
}

impl StubBackend {
    pub fn new(spec: InstanceSpec, function: StubFunction) -> Self {
        Self { spec, function }
    }
}

impl ModelBackend for StubBackend {
    fn instance(&self) -> &InstanceSpec {
        &self.spec
    }

    fn param_count(&self) -> u64 {
        0
    }

    fn embed_clip(&self, clip: &[Frame]) -> Result<ClipEmbedding, InferenceError> {
        self.check_clip_shape(clip)?;
        let dim = self.spec.embedding_dim;
        let values = match self.function {
            StubFunction::Constant(c) => vec![c; dim],
            StubFunction::MeanIntensity => {
                let (sum, count) = clip.iter().fold((0u64, 0u64), |(s, n), f| {
                    let raw = f.as_raw();
                    (s + raw.iter().map(|&v| v as u64).sum::<u64>(), n + raw.len() as u64)
                });
                vec![(sum as f64 / count as f64 / 255.0) as f32; dim]
            }
            StubFunction::ChannelMeans => {
                let mut sums = [0u64; 3];
                let mut pixels = 0u64;
                for f in clip {
                    for p in f.pixels() {
                        for c in 0..3 {
                            sums[c] += p.0[c] as u64;
                        }
                    }
                    pixels += f.width() as u64 * f.height() as u64;
                }
                let means = sums.map(|s| (s as f64 / pixels as f64 / 255.0) as f32);
                (0..dim).map(|j| means[j % 3]).collect()
            }
        };
        Ok(ClipEmbedding {
            values,
            instance: self.spec,
        })
    }
}

/// Resizes every frame of a clip to the backend's square input resolution.
pub fn prepare_clip(clip: &[Frame], spec: &InstanceSpec) -> Vec<Frame> {
    clip.iter().map(|f| resize_frame(f, spec.input_resolution)).collect()
}

/// Plans, embeds and pools one footage with one backend. Also returns the
/// number of clips used.
pub fn embed_footage_single(
    backend: &dyn ModelBackend,
    footage: &[Frame],
) -> Result<(FootageEmbedding, usize), InferenceError> {
    let spec = backend.instance();
    let plan = plan_clips(footage.len(), spec)?;
    let clips = (0..plan.len())
        .into_par_iter()
        .map(|c| {
            let frames = extract_clip_frames(footage, &plan, c)?;
            backend.embed_clip(&prepare_clip(&frames, spec))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((pool_average(&clips)?, plan.len()))
}

/// Footage-level embedding over one or more backends.
///
/// Each backend cuts the footage with its own clip plan; the pooled vectors
/// are then fused according to `fusion`.
pub fn embed_footage(
    backends: &[&dyn ModelBackend],
    footage: &[Frame],
    fusion: Fusion,
) -> Result<FootageEmbedding, InferenceError> {
    let pooled = backends
        .iter()
        .map(|b| embed_footage_single(*b, footage).map(|(e, _)| e))
        .collect::<Result<Vec<_>, _>>()?;
    fuse(&pooled, fusion)
}
