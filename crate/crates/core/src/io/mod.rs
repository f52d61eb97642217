//! File formats and dataset ingestion.

pub mod binary;
pub mod dataset;
pub mod intrinsics;
pub mod obj;
pub mod pfm;
pub mod ply;
pub mod png;
pub mod trajectory;

use std::path::Path;

use crate::geometry::TriangleMesh;
use crate::{Error, Result};

/// Loads a mesh, choosing the reader from the file extension.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("ply") => ply::read_mesh(path),
        Some("obj") => obj::read_mesh(path),
        _ => Err(Error::format(
            path,
            "unsupported mesh format (expected .ply or .obj)",
        )),
    }
}
