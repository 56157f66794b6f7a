use serde::{Deserialize, Serialize};

use super::{Frame, PreprocessError, TrackBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlateStatistic {
    #[default]
    Median,
    Mean,
}

/// Frame budget and plate estimator for one recording point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    /// Number of stilled frames to emit.
    pub tau: usize,
    #[serde(default)]
    pub plate_statistic: PlateStatistic,
}

impl Default for PreprocessSpec {
    /// Full seven-second footage at 25 fps.
    fn default() -> Self {
        Self {
            tau: 175,
            plate_statistic: PlateStatistic::Median,
        }
    }
}

impl PreprocessSpec {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.tau == 0 {
            return Err(PreprocessError::InvalidSpec("tau must be > 0".into()));
        }
        Ok(())
    }
}

/// Still background estimate, same resolution as the footage it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundPlate {
    pub pixels: Frame,
}

/// Per-frame box lookup; frames without a detection map to `None`.
fn boxes_by_frame(tracks: &[TrackBox], frames: usize) -> Vec<Option<TrackBox>> {
    let mut by_frame = vec![None; frames];
    for b in tracks {
        if let Some(slot) = by_frame.get_mut(b.frame_index as usize) {
            *slot = Some(*b);
        }
    }
    by_frame
}

fn check_resolution(footage: &[Frame], width: u32, height: u32) -> Result<(), PreprocessError> {
    for (i, f) in footage.iter().enumerate() {
        if f.dimensions() != (width, height) {
            return Err(PreprocessError::ResolutionMismatch {
                frame: i,
                width,
                height,
                actual_width: f.width(),
                actual_height: f.height(),
            });
        }
    }
    Ok(())
}

fn median(values: &mut [u8]) -> u8 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] as u16 + values[n / 2] as u16).div_ceil(2) as u8
    }
}

fn mean(values: &[u8]) -> u8 {
    let sum: u64 = values.iter().map(|&v| v as u64).sum();
    let n = values.len() as u64;
    ((sum * 2 + n) / (2 * n)) as u8
}

/// Estimates the still background behind the runner.
///
/// Each output channel value is the chosen statistic over the frames in which
/// that pixel lies outside the runner's box. A pixel covered by the runner in
/// every frame falls back to the statistic over all frames. Even-sized medians
/// take the rounded mean of the two middle values.
pub fn build_background_plate(
    footage: &[Frame],
    tracks: &[TrackBox],
    spec: &PreprocessSpec,
) -> Result<BackgroundPlate, PreprocessError> {
    let first = footage.first().ok_or(PreprocessError::EmptyFootage)?;
    let (width, height) = first.dimensions();
    check_resolution(footage, width, height)?;
    let by_frame = boxes_by_frame(tracks, footage.len());

    let statistic = |values: &mut [u8]| match spec.plate_statistic {
        PlateStatistic::Median => median(values),
        PlateStatistic::Mean => mean(values),
    };

    let mut plate = Frame::new(width, height);
    let mut visible: Vec<[u8; 3]> = Vec::with_capacity(footage.len());
    let mut channel: Vec<u8> = Vec::with_capacity(footage.len());
    for y in 0..height {
        for x in 0..width {
            visible.clear();
            for (frame, b) in footage.iter().zip(&by_frame) {
                if !b.is_some_and(|b| b.contains(x, y)) {
                    visible.push(frame.get_pixel(x, y).0);
                }
            }
            if visible.is_empty() {
                visible.extend(footage.iter().map(|f| f.get_pixel(x, y).0));
            }
            let out = plate.get_pixel_mut(x, y);
            for c in 0..3 {
                channel.clear();
                channel.extend(visible.iter().map(|p| p[c]));
                out.0[c] = statistic(&mut channel);
            }
        }
    }
    Ok(BackgroundPlate { pixels: plate })
}

/// Composites the runner onto the still plate.
///
/// Emits exactly `spec.tau` frames, taken from the first `tau` source frames
/// that carry a box. Inside the box each pixel comes from its source frame,
/// everywhere else from the plate.
pub fn context_constrain(
    footage: &[Frame],
    tracks: &[TrackBox],
    plate: &BackgroundPlate,
    spec: &PreprocessSpec,
) -> Result<Vec<Frame>, PreprocessError> {
    spec.validate()?;
    let (width, height) = plate.pixels.dimensions();
    check_resolution(footage, width, height)?;
    let by_frame = boxes_by_frame(tracks, footage.len());
    let tracked: Vec<(&Frame, TrackBox)> = footage
        .iter()
        .zip(by_frame)
        .filter_map(|(f, b)| b.map(|b| (f, b)))
        .take(spec.tau)
        .collect();
    if tracked.len() < spec.tau {
        return Err(PreprocessError::InsufficientTrackedFrames {
            required: spec.tau,
            available: tracked.len(),
        });
    }

    Ok(tracked
        .into_iter()
        .map(|(source, b)| {
            let mut out = plate.pixels.clone();
            let x_end = (b.x + b.w).min(width);
            let y_end = (b.y + b.h).min(height);
            for y in b.y..y_end {
                for x in b.x..x_end {
                    out.put_pixel(x, y, *source.get_pixel(x, y));
                }
            }
            out
        })
        .collect())
}
