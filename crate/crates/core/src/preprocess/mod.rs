//! Context constrain and clip planning.
//!
//! Footage is a sequence of RGB frames. Given the tracker's boxes for the
//! runner of interest, [`build_background_plate`] estimates a still background
//! and [`context_constrain`] composites the runner's box pixels onto it, so the
//! only motion left in frame is the runner. [`plan_clips`] then cuts the
//! stilled footage into strided, non-overlapping clips for one instance.

mod clips;
mod frames;
mod plate;
mod tracks;

use thiserror::Error;

pub use clips::{extract_clip_frames, plan_clips, ClipPlan};
pub use frames::{crop_to_tracks, read_frame_dir, resize_frame, write_frame_dir, Frame};
pub use plate::{build_background_plate, context_constrain, BackgroundPlate, PlateStatistic, PreprocessSpec};
pub use tracks::{fill_track_gaps, parse_box_file, read_box_file, validate_tracks, write_box_file, TrackBox};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("footage has no frames")]
    EmptyFootage,
    #[error("only {available} frames carry a track box, {required} needed")]
    InsufficientTrackedFrames { required: usize, available: usize },
    #[error("footage too short: {available} frames, at least {required} needed for one clip")]
    FootageTooShort { required: usize, available: usize },
    #[error("clip index {index} out of range ({clips} clips planned)")]
    IndexOutOfRange { index: usize, clips: usize },
    #[error("frame {frame} is {actual_width}x{actual_height}, expected {width}x{height}")]
    ResolutionMismatch {
        frame: usize,
        width: u32,
        height: u32,
        actual_width: u32,
        actual_height: u32,
    },
    #[error("invalid track box: {0}")]
    InvalidTrack(String),
    #[error("box file line {line}: {message}")]
    BoxParse { line: usize, message: String },
    #[error("{path}: {source}")]
    Image {
        path: String,
        source: image::ImageError,
    },
    #[error("invalid preprocess spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
