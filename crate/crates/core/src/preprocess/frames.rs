use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};

use super::{PreprocessError, TrackBox};

/// One RGB8 frame, row-major.
pub type Frame = image::RgbImage;

const FRAME_EXTENSIONS: &[&str] = &["png"];

/// Reads a directory of numbered image frames, ordered by the numeric part of
/// the file stem (`7.png` sorts before `10.png`).
pub fn read_frame_dir(dir: &Path) -> Result<Vec<Frame>, PreprocessError> {
    let mut files: Vec<(u64, String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let is_frame = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if !is_frame {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_owned();
        let number = stem
            .chars()
            .filter(char::is_ascii_digit)
            .collect::<String>()
            .parse()
            .unwrap_or(u64::MAX);
        files.push((number, stem, path));
    }
    files.sort();
    files
        .into_iter()
        .map(|(_, _, path)| {
            image::open(&path)
                .map(|img| img.to_rgb8())
                .map_err(|source| PreprocessError::Image {
                    path: path.display().to_string(),
                    source,
                })
        })
        .collect()
}

/// Writes frames as `000000.png`, `000001.png`, ... into `dir`.
pub fn write_frame_dir(dir: &Path, frames: &[Frame]) -> Result<(), PreprocessError> {
    fs::create_dir_all(dir)?;
    for (i, frame) in frames.iter().enumerate() {
        let path = dir.join(format!("{i:06}.png"));
        frame.save(&path).map_err(|source| PreprocessError::Image {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Bilinear resize to a `side` x `side` square. Frames already at that size
/// are returned unchanged.
pub fn resize_frame(frame: &Frame, side: u32) -> Frame {
    if frame.width() == side && frame.height() == side {
        return frame.clone();
    }
    imageops::resize(frame, side, side, FilterType::Triangle)
}

/// Crops every frame to the union of the runner's boxes.
///
/// Alternative model input to the full stilled frame. Returns the footage
/// unchanged when the union is empty.
pub fn crop_to_tracks(footage: &[Frame], tracks: &[TrackBox]) -> Vec<Frame> {
    let non_empty = tracks.iter().filter(|b| !b.is_empty());
    let bounds = non_empty.fold(None, |acc: Option<(u32, u32, u32, u32)>, b| {
        let (x1, y1) = (b.x + b.w, b.y + b.h);
        Some(match acc {
            None => (b.x, b.y, x1, y1),
            Some((ax0, ay0, ax1, ay1)) => (ax0.min(b.x), ay0.min(b.y), ax1.max(x1), ay1.max(y1)),
        })
    });
    let Some((x0, y0, x1, y1)) = bounds else {
        return footage.to_vec();
    };
    footage
        .iter()
        .map(|f| {
            let x1 = x1.min(f.width());
            let y1 = y1.min(f.height());
            imageops::crop_imm(f, x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0)).to_image()
        })
        .collect()
}
