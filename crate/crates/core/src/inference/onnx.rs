use std::path::Path;

use tract_onnx::prelude::*;

use super::{ClipEmbedding, InferenceError, InstanceSpec, ModelBackend, ModelManifest};
use crate::preprocess::Frame;

/// ONNX graph run on CPU through tract.
///
/// The graph takes one `(1, 3, T, H, W)` clip normalized with the manifest's
/// per-channel mean and std and yields the 192-d feature vector.
pub struct OnnxBackend {
    spec: InstanceSpec,
    mean: [f32; 3],
    std: [f32; 3],
    params: u64,
    plan: TypedRunnableModel<TypedModel>,
}

fn load_err(path: &Path, e: impl std::fmt::Display) -> InferenceError {
    InferenceError::ModelLoad(format!("{}: {e}", path.display()))
}

impl OnnxBackend {
    pub fn load(manifest: &ModelManifest, path: &Path) -> Result<Self, InferenceError> {
        let spec = manifest.instance_spec();
        let side = spec.input_resolution as usize;
        let shape = [1, 3, spec.frames_per_clip, side, side];
        let mut model = tract_onnx::onnx().model_for_path(path).map_err(|e| load_err(path, e))?;
        if let Some(node) = &manifest.feature_node {
            model = model.with_output_names([node.as_str()]).map_err(|e| load_err(path, e))?;
        }
        let plan = model
            .with_input_fact(0, f32::fact(shape).into())
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| load_err(path, e))?;
        let proto = tract_onnx::onnx().proto_model_for_path(path).map_err(|e| load_err(path, e))?;
        let params = proto
            .graph
            .map(|g| {
                g.initializer
                    .iter()
                    .map(|t| t.dims.iter().map(|&d| d.max(0) as u64).product::<u64>())
                    .sum()
            })
            .unwrap_or(0);
        Ok(Self {
            spec,
            mean: manifest.mean,
            std: manifest.std,
            params,
            plan,
        })
    }

    fn input_tensor(&self, clip: &[Frame]) -> Tensor {
        let side = self.spec.input_resolution as usize;
        let shape = (1, 3, self.spec.frames_per_clip, side, side);
        tract_ndarray::Array5::from_shape_fn(shape, |(_, c, t, y, x)| {
            let v = clip[t].get_pixel(x as u32, y as u32)[c] as f32 / 255.0;
            (v - self.mean[c]) / self.std[c]
        })
        .into_tensor()
    }
}

impl ModelBackend for OnnxBackend {
    fn instance(&self) -> &InstanceSpec {
        &self.spec
    }

    fn param_count(&self) -> u64 {
        self.params
    }

    fn embed_clip(&self, clip: &[Frame]) -> Result<ClipEmbedding, InferenceError> {
        self.check_clip_shape(clip)?;
        let outputs = self
            .plan
            .run(tvec!(self.input_tensor(clip).into()))
            .map_err(|e| InferenceError::Run(e.to_string()))?;
        let view = outputs[0]
            .to_array_view::<f32>()
            .map_err(|e| InferenceError::Run(e.to_string()))?;
        let values: Vec<f32> = view.iter().copied().collect();
        if values.len() != self.spec.embedding_dim {
            return Err(InferenceError::DimensionMismatch {
                expected: self.spec.embedding_dim,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(InferenceError::NonFinite);
        }
        Ok(ClipEmbedding {
            values,
            instance: self.spec,
        })
    }
}
