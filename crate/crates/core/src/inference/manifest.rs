use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{InferenceError, InstanceName, InstanceSpec, ModelBackend};

/// JSON sidecar describing one exported instance.
///
/// ```json
/// {"instance": "XS", "frames": 4, "sampling_rate": 12, "resolution": 182,
///  "embedding_dim": 192, "param_count": 3794322,
///  "mean": [0.45, 0.45, 0.45], "std": [0.225, 0.225, 0.225], "sha256": "..."}
/// ```
///
/// Optional keys: `model_file` (defaults to the sidecar path with an `.onnx`
/// extension), `feature_node`, `golden_inputs`, `golden_outputs`. Relative
/// paths resolve against the sidecar's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub instance: InstanceName,
    pub frames: usize,
    pub sampling_rate: usize,
    pub resolution: u32,
    pub embedding_dim: usize,
    pub param_count: u64,
    pub mean: [f32; 3],
    pub std: [f32; 3],
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub golden_inputs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub golden_outputs: Option<PathBuf>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl ModelManifest {
    pub fn from_path(path: &Path) -> Result<Self, InferenceError> {
        let text = std::fs::read_to_string(path)?;
        let mut manifest: ModelManifest = serde_json::from_str(&text)
            .map_err(|e| InferenceError::ModelLoad(format!("{}: {e}", path.display())))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if manifest.model_file.is_none() {
            let stem = path.file_stem().unwrap_or_default();
            manifest.model_file = Some(PathBuf::from(stem).with_extension("onnx"));
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn instance_spec(&self) -> InstanceSpec {
        InstanceSpec {
            name: self.instance,
            frames_per_clip: self.frames,
            sampling_rate: self.sampling_rate,
            input_resolution: self.resolution,
            embedding_dim: self.embedding_dim,
        }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        self.instance_spec().validate()?;
        if self.param_count == 0 {
            return Err(InferenceError::InvalidSpec("param_count must be > 0".into()));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(InferenceError::InvalidSpec("std entries must be > 0".into()));
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn model_path(&self) -> PathBuf {
        self.resolve(self.model_file.as_deref().unwrap_or(Path::new("model.onnx")))
    }

    pub fn golden_paths(&self) -> Option<(PathBuf, PathBuf)> {
        Some((
            self.resolve(self.golden_inputs.as_deref()?),
            self.resolve(self.golden_outputs.as_deref()?),
        ))
    }
}

/// Lowercase hex SHA-256 of a file.
pub fn sha256_file(path: &Path) -> Result<String, InferenceError> {
    let mut hasher = Sha256::new();
    let mut file = File::open(path)?;
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Loads the ONNX graph behind `manifest` after verifying its digest.
pub fn load_backend(manifest: &ModelManifest) -> Result<Box<dyn ModelBackend>, InferenceError> {
    manifest.validate()?;
    let path = manifest.model_path();
    if !path.is_file() {
        return Err(InferenceError::ModelLoad(format!("{}: no such model file", path.display())));
    }
    let actual = sha256_file(&path)?;
    if !actual.eq_ignore_ascii_case(manifest.sha256.trim()) {
        return Err(InferenceError::DigestMismatch {
            path: path.display().to_string(),
            expected: manifest.sha256.clone(),
            actual,
        });
    }
    open_graph(manifest, &path)
}

#[cfg(feature = "onnx")]
fn open_graph(manifest: &ModelManifest, path: &Path) -> Result<Box<dyn ModelBackend>, InferenceError> {
    let backend = super::onnx::OnnxBackend::load(manifest, path)?;
    if backend.param_count() != manifest.param_count {
        log::warn!(
            "{}: graph holds {} parameters, manifest records {}",
            path.display(),
            backend.param_count(),
            manifest.param_count
        );
    }
    Ok(Box::new(backend))
}

#[cfg(not(feature = "onnx"))]
fn open_graph(_: &ModelManifest, path: &Path) -> Result<Box<dyn ModelBackend>, InferenceError> {
    Err(InferenceError::ModelLoad(format!(
        "{}: built without the `onnx` feature",
        path.display()
    )))
}
