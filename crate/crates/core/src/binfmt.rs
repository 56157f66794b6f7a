//! Binary container shared by embedding stores, fitted models and golden vectors.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "CRTBIN\0\x01"
//! 8       4     header length H, u32 little-endian
//! 12      H     UTF-8 JSON header
//! 12+H    8     payload length N (number of f32 values), u64 little-endian
//! 20+H    4N    payload, f32 little-endian, row-major
//! ```

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"CRTBIN\0\x01";

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("not a CRT binary container (bad magic)")]
    BadMagic,
    #[error("container header is not valid JSON: {0}")]
    Header(#[from] serde_json::Error),
    #[error("container payload truncated: expected {expected} values")]
    Truncated { expected: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_container<W: Write, H: Serialize>(
    mut sink: W,
    header: &H,
    payload: &[f32],
) -> Result<(), ContainerError> {
    let header = serde_json::to_vec(header)?;
    let header_len = u32::try_from(header.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "header too large"))?;
    sink.write_all(MAGIC)?;
    sink.write_all(&header_len.to_le_bytes())?;
    sink.write_all(&header)?;
    sink.write_all(&(payload.len() as u64).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(payload.len() * 4);
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&bytes)?;
    sink.flush()?;
    Ok(())
}

pub fn read_container<R: Read, H: DeserializeOwned>(
    mut source: R,
) -> Result<(H, Vec<f32>), ContainerError> {
    let mut magic = [0u8; 8];
    source.read_exact(&mut magic).map_err(|_| ContainerError::BadMagic)?;
    if &magic != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let mut word = [0u8; 4];
    source.read_exact(&mut word)?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    source.read_exact(&mut header)?;
    let header: H = serde_json::from_slice(&header)?;

    let mut dword = [0u8; 8];
    source.read_exact(&mut dword)?;
    let expected = u64::from_le_bytes(dword);
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() as u64 != expected * 4 {
        return Err(ContainerError::Truncated { expected });
    }
    let payload = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((header, payload))
}
