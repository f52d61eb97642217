//! Dataset layout.
//!
//! A dataset is described by a `scene.toml`:
//!
//! ```toml
//! mesh = "mesh.ply"
//! trajectory = "trajectory.txt"
//! intrinsics = "intrinsics.toml"
//! frames = "frames"
//! split = "split.toml"   # optional; without it every frame is a train frame
//! stride = 10            # optional train-frame subsampling
//! ```
//!
//! Relative paths resolve against the directory holding `scene.toml`.
//! Frame `i` is the `i`-th pose line of the trajectory and is stored as
//! `frames/{i:05}.pfm` (linear) or `frames/{i:05}.png` (8-bit, gamma 2.2);
//! the PFM is preferred when both exist. `split.toml` holds `train` and
//! `test` lists of frame ids.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{intrinsics, pfm, png, read_mesh, trajectory};
use crate::frame::Frame;
use crate::geometry::{Camera, Intrinsics, Scene};
use crate::io::trajectory::Pose;
use crate::{Error, Result};

pub const DEFAULT_STRIDE: usize = 10;
pub const SCENE_FILE: &str = "scene.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub mesh: PathBuf,
    pub trajectory: PathBuf,
    pub intrinsics: PathBuf,
    pub frames: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    #[serde(default)]
    pub train: Vec<usize>,
    #[serde(default)]
    pub test: Vec<usize>,
}

impl Split {
    pub fn validate(&self, frame_count: usize) -> Result<()> {
        let train: BTreeSet<_> = self.train.iter().copied().collect();
        if train.len() != self.train.len() {
            return Err(Error::InvalidDataset("duplicate train frame id".into()));
        }
        let test: BTreeSet<_> = self.test.iter().copied().collect();
        if test.len() != self.test.len() {
            return Err(Error::InvalidDataset("duplicate test frame id".into()));
        }
        if let Some(id) = train.intersection(&test).next() {
            return Err(Error::InvalidDataset(format!(
                "frame {id} is in both the train and test split"
            )));
        }
        if let Some(id) = train.union(&test).find(|&&id| id >= frame_count) {
            return Err(Error::InvalidDataset(format!(
                "split names frame {id} but the trajectory has {frame_count} poses"
            )));
        }
        Ok(())
    }
}

/// Resolved paths and split of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub mesh_path: PathBuf,
    pub trajectory_path: PathBuf,
    pub intrinsics_path: PathBuf,
    pub frames_dir: PathBuf,
    pub split: Split,
    pub stride: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Overrides the frames directory of `scene.toml`.
    pub frames_dir: Option<PathBuf>,
    /// Overrides the mesh of `scene.toml`.
    pub mesh: Option<PathBuf>,
    /// Overrides the train-frame stride.
    pub stride: Option<usize>,
}

#[derive(Debug)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub scene: Scene,
    pub intrinsics: Intrinsics,
    pub poses: Vec<Pose>,
    /// Train frames after stride subsampling.
    pub train: Vec<Frame>,
    pub test: Vec<Frame>,
}

impl LoadedDataset {
    pub fn train_cameras(&self) -> Vec<Camera> {
        self.train.iter().map(|f| f.camera).collect()
    }
}

pub fn frame_stem(id: usize) -> String {
    format!("{id:05}")
}

/// Finds the image for frame `id`, preferring PFM.
pub fn frame_path(frames_dir: &Path, id: usize) -> Result<PathBuf> {
    let stem = frame_stem(id);
    let pfm = frames_dir.join(format!("{stem}.pfm"));
    if pfm.is_file() {
        return Ok(pfm);
    }
    let png = frames_dir.join(format!("{stem}.png"));
    if png.is_file() {
        return Ok(png);
    }
    Err(Error::MissingFile(png))
}

fn read_frame_image(path: &Path) -> Result<crate::raster::RgbImage> {
    if path.extension().is_some_and(|e| e == "pfm") {
        pfm::read_rgb(path)
    } else {
        png::read_linear(path)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// `root` may be a directory holding `scene.toml` or the file itself.
pub fn scene_file(root: &Path) -> PathBuf {
    if root.is_dir() {
        root.join(SCENE_FILE)
    } else {
        root.to_path_buf()
    }
}

pub fn read_scene_config(path: &Path) -> Result<SceneConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_split(path: &Path) -> Result<Split> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_scene_config(path: &Path, config: &SceneConfig) -> Result<()> {
    write_toml(path, config)
}

pub fn write_split(path: &Path, split: &Split) -> Result<()> {
    write_toml(path, split)
}

pub fn load_dataset(root: &Path, options: &LoadOptions) -> Result<LoadedDataset> {
    let scene_path = scene_file(root);
    let config = read_scene_config(&scene_path)?;
    let base = scene_path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let dataset_mesh = options
        .mesh
        .clone()
        .unwrap_or_else(|| resolve(&base, &config.mesh));
    let trajectory_path = resolve(&base, &config.trajectory);
    let intrinsics_path = resolve(&base, &config.intrinsics);
    let frames_dir = options
        .frames_dir
        .clone()
        .unwrap_or_else(|| resolve(&base, &config.frames));
    let stride = options.stride.or(config.stride).unwrap_or(DEFAULT_STRIDE);
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be at least 1".into()));
    }

    let intr = intrinsics::read(&intrinsics_path)?;
    let poses = trajectory::read(&trajectory_path)?;
    if poses.is_empty() {
        return Err(Error::InvalidDataset("trajectory holds no poses".into()));
    }
    let paths = (0..poses.len())
        .map(|id| frame_path(&frames_dir, id))
        .collect::<Result<Vec<_>>>()?;

    let split = match &config.split {
        Some(p) => read_split(&resolve(&base, p))?,
        None => Split {
            train: (0..poses.len()).collect(),
            test: Vec::new(),
        },
    };
    split.validate(poses.len())?;

    let mesh = read_mesh(&dataset_mesh)?;
    mesh.validate()?;
    let scene = Scene::new(mesh);

    let train_ids: Vec<usize> = split.train.iter().copied().step_by(stride).collect();
    let load = |ids: &[usize]| -> Result<Vec<Frame>> {
        ids.par_iter()
            .map(|&id| {
                let camera = Camera::new(intr, poses[id].world_from_camera)?;
                let image = read_frame_image(&paths[id])?;
                if image.width() != intr.width || image.height() != intr.height {
                    return Err(Error::ImageSizeMismatch {
                        frame: frame_stem(id),
                        expected_width: intr.width,
                        expected_height: intr.height,
                        actual_width: image.width(),
                        actual_height: image.height(),
                    });
                }
                Ok(Frame { id, camera, image })
            })
            .collect()
    };
    let train = load(&train_ids)?;
    let test = load(&split.test)?;
    if train.is_empty() {
        warn!("dataset has no train frames");
    }
    info!(
        "loaded {} train frames (stride {stride}) and {} test frames from {}",
        train.len(),
        test.len(),
        scene_path.display()
    );

    Ok(LoadedDataset {
        dataset: Dataset {
            root: base,
            mesh_path: dataset_mesh,
            trajectory_path,
            intrinsics_path,
            frames_dir,
            split,
            stride,
        },
        scene,
        intrinsics: intr,
        poses,
        train,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameFormat {
    Pfm,
    Png,
    /// Both files are written; the loader reads the PFM.
    #[default]
    Both,
}

/// Writes frames, trajectory, intrinsics, split and `scene.toml` into `dir`.
/// The mesh file is expected at `dir/mesh_name`.
pub fn write_dataset(
    dir: &Path,
    mesh_name: &str,
    frames: &[Frame],
    split: &Split,
    stride: Option<usize>,
    format: FrameFormat,
) -> Result<()> {
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let intr = match frames.first() {
        Some(f) => *f.camera.intrinsics(),
        None => return Err(Error::InvalidDataset("no frames to write".into())),
    };
    for (i, f) in frames.iter().enumerate() {
        if f.id != i {
            return Err(Error::InvalidDataset(format!(
                "frame at position {i} has id {}",
                f.id
            )));
        }
    }
    frames.par_iter().try_for_each(|f| -> Result<()> {
        let stem = frame_stem(f.id);
        if matches!(format, FrameFormat::Pfm | FrameFormat::Both) {
            pfm::write_rgb(&frames_dir.join(format!("{stem}.pfm")), &f.image)?;
        }
        if matches!(format, FrameFormat::Png | FrameFormat::Both) {
            png::write(&frames_dir.join(format!("{stem}.png")), &f.image, 0.0)?;
        }
        Ok(())
    })?;
    let poses: Vec<Pose> = frames
        .iter()
        .map(|f| Pose {
            timestamp: f.id as f64,
            world_from_camera: *f.camera.world_from_camera(),
        })
        .collect();
    trajectory::write(&dir.join("trajectory.txt"), &poses)?;
    intrinsics::write(&dir.join("intrinsics.toml"), &intr)?;
    write_split(&dir.join("split.toml"), split)?;
    write_scene_config(
        &dir.join(SCENE_FILE),
        &SceneConfig {
            mesh: mesh_name.into(),
            trajectory: "trajectory.txt".into(),
            intrinsics: "intrinsics.toml".into(),
            frames: "frames".into(),
            split: Some("split.toml".into()),
            stride,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_must_be_disjoint() {
        let split = Split {
            train: vec![0, 1, 2],
            test: vec![2, 3],
        };
        assert!(matches!(split.validate(4), Err(Error::InvalidDataset(_))));
        let split = Split {
            train: vec![0, 1],
            test: vec![5],
        };
        assert!(split.validate(4).is_err());
        let split = Split {
            train: vec![0, 1],
            test: vec![],
        };
        assert!(split.validate(4).is_ok());
    }

    #[test]
    fn scene_config_round_trip() {
        let cfg = SceneConfig {
            mesh: "mesh.ply".into(),
            trajectory: "t.txt".into(),
            intrinsics: "i.toml".into(),
            frames: "frames".into(),
            split: None,
            stride: Some(3),
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<SceneConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn frame_lookup_prefers_pfm() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("00003.png"), b"").unwrap();
        assert_eq!(
            frame_path(dir.path(), 3).unwrap(),
            dir.path().join("00003.png")
        );
        fs::write(dir.path().join("00003.pfm"), b"").unwrap();
        assert_eq!(
            frame_path(dir.path(), 3).unwrap(),
            dir.path().join("00003.pfm")
        );
        assert!(matches!(
            frame_path(dir.path(), 4),
            Err(Error::MissingFile(_))
        ));
    }
}
