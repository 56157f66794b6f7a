//! Golden probe clips and the vectors the exported graph produced for them.
//!
//! Both files use the [`binfmt`](crate::binfmt) container. Input rows hold
//! one clip each as raw RGB values (`0..=255` stored as f32) in
//! `(frame, y, x, channel)` order, so they go through the same normalization
//! as real footage. Output rows hold one 192-vector each.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InferenceError, InstanceName, ModelBackend};
use crate::binfmt::{read_container, write_container};
use crate::preprocess::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldenKind {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenHeader {
    pub kind: GoldenKind,
    pub instance: InstanceName,
    pub rows: usize,
    /// Shape of one row: `[frames, height, width, 3]` for inputs, `[192]` for outputs.
    pub shape: Vec<usize>,
    /// File name of the other half of the pair.
    pub paired: String,
}

impl GoldenHeader {
    fn row_len(&self) -> usize {
        self.shape.iter().product()
    }
}

pub fn write_golden(path: &Path, header: &GoldenHeader, rows: &[f32]) -> Result<(), InferenceError> {
    if rows.len() != header.rows * header.row_len() {
        return Err(InferenceError::DimensionMismatch {
            expected: header.rows * header.row_len(),
            actual: rows.len(),
        });
    }
    write_container(BufWriter::new(File::create(path)?), header, rows)?;
    Ok(())
}

pub fn read_golden(path: &Path) -> Result<(GoldenHeader, Vec<f32>), InferenceError> {
    let (header, rows): (GoldenHeader, Vec<f32>) = read_container(BufReader::new(File::open(path)?))?;
    if rows.len() != header.rows * header.row_len() {
        return Err(InferenceError::DimensionMismatch {
            expected: header.rows * header.row_len(),
            actual: rows.len(),
        });
    }
    Ok((header, rows))
}

fn row_to_clip(row: &[f32], shape: &[usize]) -> Result<Vec<Frame>, InferenceError> {
    let &[frames, height, width, 3] = shape else {
        return Err(InferenceError::InvalidSpec(format!("golden input shape {shape:?} is not [T, H, W, 3]")));
    };
    let per_frame = height * width * 3;
    Ok((0..frames)
        .map(|t| {
            let raw = row[t * per_frame..(t + 1) * per_frame]
                .iter()
                .map(|&v| v.round().clamp(0.0, 255.0) as u8)
                .collect();
            Frame::from_raw(width as u32, height as u32, raw).expect("row length checked")
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenReport {
    pub probes: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.max_abs_error <= self.tolerance
    }
}

/// Runs `backend` on every golden input and compares against the stored outputs.
pub fn check_golden(
    backend: &dyn ModelBackend,
    inputs: &Path,
    outputs: &Path,
    tolerance: f64,
) -> Result<GoldenReport, InferenceError> {
    let (in_header, in_rows) = read_golden(inputs)?;
    let (out_header, out_rows) = read_golden(outputs)?;
    if in_header.rows != out_header.rows {
        return Err(InferenceError::DimensionMismatch {
            expected: in_header.rows,
            actual: out_header.rows,
        });
    }
    let in_len = in_header.row_len();
    let out_len = out_header.row_len();
    let mut max_abs_error = 0.0f64;
    for i in 0..in_header.rows {
        let clip = row_to_clip(&in_rows[i * in_len..(i + 1) * in_len], &in_header.shape)?;
        let got = backend.embed_clip(&clip)?;
        let want = &out_rows[i * out_len..(i + 1) * out_len];
        if got.values.len() != want.len() {
            return Err(InferenceError::DimensionMismatch {
                expected: want.len(),
                actual: got.values.len(),
            });
        }
        for (g, w) in got.values.iter().zip(want) {
            max_abs_error = max_abs_error.max((*g as f64 - *w as f64).abs());
        }
    }
    Ok(GoldenReport {
        probes: in_header.rows,
        max_abs_error,
        tolerance,
    })
}
