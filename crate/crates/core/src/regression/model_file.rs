use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::knn::{KnnModel, Metric, Weighting};
use super::{knn_fit, NormalizationParams, NormalizedCrt, RegressionError};
use crate::binfmt::{read_container, write_container};

/// Header of a saved regressor. The payload holds the `rows * dim` training
/// embeddings followed by the `rows` normalized targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFileHeader {
    pub k: usize,
    pub metric: Metric,
    pub weighting: Weighting,
    pub dim: usize,
    pub rows: usize,
    #[serde(default)]
    pub normalization: Option<NormalizationParams>,
}

pub fn save_model(
    path: &Path,
    model: &KnnModel,
    normalization: Option<NormalizationParams>,
) -> Result<(), RegressionError> {
    let header = ModelFileHeader {
        k: model.k(),
        metric: model.metric(),
        weighting: model.weighting(),
        dim: model.dim(),
        rows: model.len(),
        normalization,
    };
    let mut payload = model.raw_rows().to_vec();
    payload.extend(model.targets().iter().map(|&t| t as f32));
    write_container(BufWriter::new(File::create(path)?), &header, &payload)?;
    Ok(())
}

/// Targets are stored as f32, so a reloaded model predicts within f32
/// rounding of the original.
pub fn load_model(path: &Path) -> Result<(KnnModel, ModelFileHeader), RegressionError> {
    let (header, payload): (ModelFileHeader, Vec<f32>) = read_container(BufReader::new(File::open(path)?))?;
    let expected = header.rows * header.dim + header.rows;
    if payload.len() != expected {
        return Err(RegressionError::DimensionMismatch {
            expected,
            actual: payload.len(),
        });
    }
    let (flat, targets) = payload.split_at(header.rows * header.dim);
    let rows: Vec<&[f32]> = flat.chunks(header.dim.max(1)).collect();
    let targets: Vec<NormalizedCrt> = targets.iter().map(|&t| NormalizedCrt(t as f64)).collect();
    let model = knn_fit(&rows, &targets, header.k, header.metric, header.weighting)?;
    Ok((model, header))
}
