use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::PreprocessError;

/// The runner's bounding box in one frame. A box with zero width or height is
/// a tracked frame whose runner covers no pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackBox {
    pub frame_index: u32,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl TrackBox {
    pub const fn new(frame_index: u32, x: u32, y: u32, w: u32, h: u32) -> Self {
        Self {
            frame_index,
            x,
            y,
            w,
            h,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    #[inline]
    pub fn contains(&self, px: u32, py: u32) -> bool {
        px >= self.x && py >= self.y && px - self.x < self.w && py - self.y < self.h
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.x as u64 + self.w as u64 <= width as u64 && self.y as u64 + self.h as u64 <= height as u64
    }
}

/// Checks boxes against footage geometry: in-bounds, frame index in range,
/// at most one box per frame.
pub fn validate_tracks(
    tracks: &[TrackBox],
    frame_count: usize,
    width: u32,
    height: u32,
) -> Result<(), PreprocessError> {
    let mut seen = std::collections::HashSet::new();
    for b in tracks {
        if b.frame_index as usize >= frame_count {
            return Err(PreprocessError::InvalidTrack(format!(
                "frame {} beyond footage of {frame_count} frames",
                b.frame_index
            )));
        }
        if !b.fits(width, height) {
            return Err(PreprocessError::InvalidTrack(format!(
                "box {}+{}x{}+{} at frame {} exceeds {width}x{height}",
                b.x, b.w, b.y, b.h, b.frame_index
            )));
        }
        if !seen.insert(b.frame_index) {
            return Err(PreprocessError::InvalidTrack(format!(
                "more than one box at frame {}",
                b.frame_index
            )));
        }
    }
    Ok(())
}

/// Parses a MOT-style box file: one `frame,x,y,w,h` row per frame, integers,
/// 0-based frame index. Blank lines and `#` comments are skipped.
pub fn parse_box_file<R: Read>(source: R) -> Result<Vec<TrackBox>, PreprocessError> {
    let mut boxes = BTreeMap::new();
    for (n, line) in BufReader::new(source).lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(PreprocessError::BoxParse {
                line: line_no,
                message: format!("expected 5 fields frame,x,y,w,h, found {}", fields.len()),
            });
        }
        let mut values = [0u32; 5];
        for (slot, (name, text)) in values
            .iter_mut()
            .zip(["frame", "x", "y", "w", "h"].iter().zip(&fields))
        {
            *slot = text.parse().map_err(|_| PreprocessError::BoxParse {
                line: line_no,
                message: format!("field `{name}` is not a non-negative integer: {text:?}"),
            })?;
        }
        let [frame, x, y, w, h] = values;
        if boxes.insert(frame, TrackBox::new(frame, x, y, w, h)).is_some() {
            return Err(PreprocessError::BoxParse {
                line: line_no,
                message: format!("duplicate box for frame {frame}"),
            });
        }
    }
    Ok(boxes.into_values().collect())
}

pub fn read_box_file(path: &Path) -> Result<Vec<TrackBox>, PreprocessError> {
    parse_box_file(File::open(path)?)
}

pub fn write_box_file<W: Write>(mut sink: W, tracks: &[TrackBox]) -> std::io::Result<()> {
    for b in tracks {
        writeln!(sink, "{},{},{},{},{}", b.frame_index, b.x, b.y, b.w, b.h)?;
    }
    Ok(())
}

/// One box per frame `0..total_frames`.
///
/// Frames between two detections get box corners linearly interpolated and
/// rounded to the nearest pixel; frames before the first or after the last
/// detection repeat the nearest box. Returns an empty list when there is
/// nothing to interpolate from.
pub fn fill_track_gaps(tracks: &[TrackBox], total_frames: usize) -> Vec<TrackBox> {
    let known: BTreeMap<u32, TrackBox> = tracks
        .iter()
        .filter(|b| (b.frame_index as usize) < total_frames)
        .map(|b| (b.frame_index, *b))
        .collect();
    if known.is_empty() {
        return Vec::new();
    }
    (0..total_frames as u32)
        .map(|t| {
            if let Some(b) = known.get(&t) {
                return *b;
            }
            let before = known.range(..t).next_back().map(|(_, b)| *b);
            let after = known.range(t..).next().map(|(_, b)| *b);
            let b = match (before, after) {
                (Some(a), Some(c)) => {
                    let s = (t - a.frame_index) as f64 / (c.frame_index - a.frame_index) as f64;
                    let lerp = |p: u32, q: u32| (p as f64 + s * (q as f64 - p as f64)).round() as u32;
                    let x0 = lerp(a.x, c.x);
                    let y0 = lerp(a.y, c.y);
                    let x1 = lerp(a.x + a.w, c.x + c.w);
                    let y1 = lerp(a.y + a.h, c.y + c.h);
                    TrackBox::new(t, x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
                }
                (Some(a), None) => a,
                (None, Some(c)) => c,
                (None, None) => unreachable!("known is non-empty"),
            };
            TrackBox { frame_index: t, ..b }
        })
        .collect()
}
