use serde::{Deserialize, Serialize};

use super::{Frame, PreprocessError};
use crate::inference::InstanceSpec;

/// Strided clip decomposition of one footage for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipPlan {
    pub clip_starts: Vec<usize>,
    pub frames_per_clip: usize,
    pub sampling_rate: usize,
}

impl ClipPlan {
    pub fn len(&self) -> usize {
        self.clip_starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clip_starts.is_empty()
    }

    /// Source frame indices of clip `clip`: `start + j * sampling_rate` for `j < frames_per_clip`.
    pub fn indices(&self, clip: usize) -> Option<Vec<usize>> {
        let start = *self.clip_starts.get(clip)?;
        Some(
            (0..self.frames_per_clip)
                .map(|j| start + j * self.sampling_rate)
                .collect(),
        )
    }
}

/// Left-aligned, non-overlapping clips of `q` frames taken every `SR` frames.
///
/// Each clip spans `q * SR` source frames; trailing frames that cannot fill a
/// whole span are dropped.
///
/// ```
/// use racecrt::inference::{InstanceName, InstanceSpec};
/// use racecrt::preprocess::plan_clips;
///
/// let plan = plan_clips(175, &InstanceSpec::new(InstanceName::XS, 182))?;
/// assert_eq!(plan.len(), 3);
/// assert_eq!(plan.indices(0).unwrap(), vec![0, 12, 24, 36]);
/// # Ok::<(), racecrt::preprocess::PreprocessError>(())
/// ```
pub fn plan_clips(total_frames: usize, instance: &InstanceSpec) -> Result<ClipPlan, PreprocessError> {
    let q = instance.frames_per_clip;
    let stride = instance.sampling_rate;
    let span = q * stride;
    if span == 0 {
        return Err(PreprocessError::InvalidSpec(
            "frames per clip and sampling rate must be > 0".into(),
        ));
    }
    if total_frames < span {
        return Err(PreprocessError::FootageTooShort {
            required: span,
            available: total_frames,
        });
    }
    Ok(ClipPlan {
        clip_starts: (0..total_frames / span).map(|c| c * span).collect(),
        frames_per_clip: q,
        sampling_rate: stride,
    })
}

/// The `q` frames of clip `clip_index`, in temporal order.
pub fn extract_clip_frames(
    footage: &[Frame],
    plan: &ClipPlan,
    clip_index: usize,
) -> Result<Vec<Frame>, PreprocessError> {
    let indices = plan
        .indices(clip_index)
        .ok_or(PreprocessError::IndexOutOfRange {
            index: clip_index,
            clips: plan.len(),
        })?;
    if let Some(&last) = indices.last() {
        if last >= footage.len() {
            return Err(PreprocessError::FootageTooShort {
                required: last + 1,
                available: footage.len(),
            });
        }
    }
    Ok(indices.into_iter().map(|i| footage[i].clone()).collect())
}
