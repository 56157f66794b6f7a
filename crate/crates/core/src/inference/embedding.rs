use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{InferenceError, InstanceName, InstanceSpec, EMBEDDING_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEmbedding {
    pub values: Vec<f32>,
    pub instance: InstanceSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    #[default]
    Single,
    Average,
    Concat,
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fusion::Single => "single",
            Fusion::Average => "average",
            Fusion::Concat => "concat",
        })
    }
}

impl FromStr for Fusion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(Fusion::Single),
            "average" | "avg" | "mean" => Ok(Fusion::Average),
            "concat" | "concatenate" => Ok(Fusion::Concat),
            _ => Err(format!("unknown fusion `{s}` (single, average, concat)")),
        }
    }
}

/// Footage-level vector and the instances that produced it, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootageEmbedding {
    pub values: Vec<f32>,
    pub provenance: Vec<InstanceName>,
    pub fusion: Fusion,
}

impl AsRef<[f32]> for FootageEmbedding {
    fn as_ref(&self) -> &[f32] {
        &self.values
    }
}

/// Column means of equally long rows. Each column is summed in sorted order,
/// so the result does not depend on row order.
fn column_means(rows: &[&[f32]]) -> Vec<f32> {
    let dim = rows[0].len();
    let mut column = Vec::with_capacity(rows.len());
    (0..dim)
        .map(|j| {
            column.clear();
            column.extend(rows.iter().map(|r| r[j]));
            column.sort_by(f32::total_cmp);
            let sum: f64 = column.iter().map(|&v| v as f64).sum();
            (sum / rows.len() as f64) as f32
        })
        .collect()
}

fn check_finite(values: &[f32]) -> Result<(), InferenceError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(InferenceError::NonFinite)
    }
}

/// Element-wise mean of the clip embeddings of one footage.
pub fn pool_average(clips: &[ClipEmbedding]) -> Result<FootageEmbedding, InferenceError> {
    let first = clips.first().ok_or(InferenceError::EmptyInput)?;
    for clip in clips {
        if clip.instance.name != first.instance.name {
            return Err(InferenceError::MixedInstance(first.instance.name, clip.instance.name));
        }
        if clip.values.len() != first.values.len() {
            return Err(InferenceError::DimensionMismatch {
                expected: first.values.len(),
                actual: clip.values.len(),
            });
        }
    }
    let rows: Vec<&[f32]> = clips.iter().map(|c| c.values.as_slice()).collect();
    let values = column_means(&rows);
    check_finite(&values)?;
    Ok(FootageEmbedding {
        values,
        provenance: vec![first.instance.name],
        fusion: Fusion::Single,
    })
}

/// Sorts inputs into canonical instance order after checking the fusion preconditions.
fn canonical_inputs(embeddings: &[FootageEmbedding]) -> Result<Vec<&FootageEmbedding>, InferenceError> {
    if embeddings.len() < 2 {
        return Err(InferenceError::TooFewInstances(embeddings.len()));
    }
    let mut seen = Vec::new();
    for e in embeddings {
        if e.values.len() != EMBEDDING_DIM {
            return Err(InferenceError::DimensionMismatch {
                expected: EMBEDDING_DIM,
                actual: e.values.len(),
            });
        }
        if e.provenance.is_empty() {
            return Err(InferenceError::EmptyInput);
        }
        for name in &e.provenance {
            if seen.contains(name) {
                return Err(InferenceError::DuplicateInstance(*name));
            }
            seen.push(*name);
        }
    }
    let mut ordered: Vec<&FootageEmbedding> = embeddings.iter().collect();
    ordered.sort_by_key(|e| e.provenance[0]);
    Ok(ordered)
}

fn merged_provenance(ordered: &[&FootageEmbedding]) -> Vec<InstanceName> {
    let mut names: Vec<InstanceName> = ordered.iter().flat_map(|e| e.provenance.iter().copied()).collect();
    names.sort();
    names
}

/// Element-wise mean of footage vectors from distinct instances.
pub fn fuse_average(embeddings: &[FootageEmbedding]) -> Result<FootageEmbedding, InferenceError> {
    let ordered = canonical_inputs(embeddings)?;
    let rows: Vec<&[f32]> = ordered.iter().map(|e| e.values.as_slice()).collect();
    Ok(FootageEmbedding {
        values: column_means(&rows),
        provenance: merged_provenance(&ordered),
        fusion: Fusion::Average,
    })
}

/// Concatenation in canonical instance order; length `192 * #instances`.
pub fn fuse_concat(embeddings: &[FootageEmbedding]) -> Result<FootageEmbedding, InferenceError> {
    let ordered = canonical_inputs(embeddings)?;
    Ok(FootageEmbedding {
        values: ordered.iter().flat_map(|e| e.values.iter().copied()).collect(),
        provenance: merged_provenance(&ordered),
        fusion: Fusion::Concat,
    })
}

/// Dispatches on `fusion`; `Single` passes a lone embedding through.
pub fn fuse(embeddings: &[FootageEmbedding], fusion: Fusion) -> Result<FootageEmbedding, InferenceError> {
    match fusion {
        Fusion::Single => match embeddings {
            [one] => Ok(one.clone()),
            _ => Err(InferenceError::SingleNeedsOneBackend(embeddings.len())),
        },
        Fusion::Average => fuse_average(embeddings),
        Fusion::Concat => fuse_concat(embeddings),
    }
}
