//! Writes a rendered synthetic scene as a regular dataset directory plus
//! ground-truth files.

use std::fs;
use std::path::Path;

use super::SyntheticDataset;
use crate::io::dataset::{write_dataset, FrameFormat, Split};
use crate::io::{pfm, ply};
use crate::raster::Rgb;
use crate::{Error, Result};

pub const MESH_FILE: &str = "mesh.ply";
pub const GT_ALBEDO_FILE: &str = "gt_albedo.ply";
pub const ENV_FILE: &str = "env.pfm";

pub fn gt_srm_file(i: usize) -> String {
    format!("gt_srm_{i}.pfm")
}

/// Layout of `dir` after the call:
///
/// - `scene.toml`, `trajectory.txt`, `intrinsics.toml`, `split.toml`, `frames/`
/// - `mesh.ply`: the estimator's mesh with black vertex colors
/// - `gt_albedo.ply`: the same mesh carrying ground-truth diffuse radiance
/// - `gt_srm_{i}.pfm` per object and `env.pfm`
///
/// The stride is pinned to 1 so every rendered train frame is used.
pub fn write_synthetic(dir: &Path, ds: &SyntheticDataset, format: FrameFormat) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let split = Split {
        train: (0..ds.frames.len())
            .filter(|i| !ds.test_ids.contains(i))
            .collect(),
        test: ds.test_ids.clone(),
    };
    write_dataset(dir, MESH_FILE, &ds.frames, &split, Some(1), format)?;
    let bare = ds
        .mesh
        .clone()
        .with_albedo(vec![Rgb::zeros(); ds.mesh.vertex_count()])?;
    ply::write_mesh(&dir.join(MESH_FILE), &bare)?;
    ply::write_mesh(&dir.join(GT_ALBEDO_FILE), &ds.mesh)?;
    for (i, srm) in ds.gt_srms.iter().enumerate() {
        pfm::write_panorama(&dir.join(gt_srm_file(i)), srm)?;
    }
    pfm::write_panorama(&dir.join(ENV_FILE), &ds.env)
}
