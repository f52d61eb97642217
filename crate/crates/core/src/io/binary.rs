//! Raw little-endian arrays: material logits (`f32`, vertex-major V x M)
//! and per-vertex observation counts (`u32`).

use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub fn write_logits(path: &Path, logits: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = logits
        .iter()
        .flat_map(|&z| (z as f32).to_le_bytes())
        .collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads logits for `vertex_count` vertices and returns them together with
/// the material count implied by the file size.
pub fn read_logits(path: &Path, vertex_count: usize) -> Result<(usize, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let values = bytes.len() / 4;
    if bytes.len() % 4 != 0 || vertex_count == 0 || values % vertex_count != 0 || values == 0 {
        return Err(Error::format(
            path,
            format!(
                "{} bytes do not hold V x M f32 values for V = {vertex_count}",
                bytes.len()
            ),
        ));
    }
    let logits = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((values / vertex_count, logits))
}

pub fn write_counts(path: &Path, counts: &[u32]) -> Result<()> {
    let bytes: Vec<u8> = counts.iter().flat_map(|c| c.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_counts(path: &Path) -> Result<Vec<u32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(path, "length is not a multiple of 4"));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
