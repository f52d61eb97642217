//! Image and SRM error measures.

use serde::{Deserialize, Serialize};

use crate::geometry::{Camera, Point};
use crate::panorama::Panorama;
use crate::raster::{MaskImage, RgbImage};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    /// Mean absolute difference over masked pixels and channels.
    pub l1: f64,
    /// Mean Euclidean RGB distance over masked pixels.
    pub l2: f64,
    /// Peak 1.0; infinite for identical images.
    pub psnr: f64,
    /// Angle in degrees between this view and the nearest train view, both
    /// taken as directions toward the mesh centroid.
    pub view_angle_deg: Option<f64>,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: Vec<FrameMetrics>,
    pub mean_l1: f64,
    pub mean_l2: f64,
    pub mean_psnr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageError {
    pub l1: f64,
    pub l2: f64,
    pub mse: f64,
    pub pixels: usize,
}

pub fn image_error(a: &RgbImage, b: &RgbImage, mask: &MaskImage) -> Result<ImageError> {
    if !a.same_size(b) || !a.same_size(mask) {
        return Err(Error::DimensionMismatch(format!(
            "images {}x{}, {}x{} and mask {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height(),
            mask.width(),
            mask.height()
        )));
    }
    let (mut l1, mut l2, mut sq, mut n) = (0.0, 0.0, 0.0, 0usize);
    for ((x, y), &m) in a.as_slice().iter().zip(b.as_slice()).zip(mask.as_slice()) {
        if !m {
            continue;
        }
        let d = x - y;
        l1 += d.abs().sum();
        l2 += d.norm();
        sq += d.norm_squared();
        n += 1;
    }
    if n == 0 {
        return Ok(ImageError {
            l1: 0.0,
            l2: 0.0,
            mse: 0.0,
            pixels: 0,
        });
    }
    Ok(ImageError {
        l1: l1 / (3 * n) as f64,
        l2: l2 / n as f64,
        mse: sq / (3 * n) as f64,
        pixels: n,
    })
}

pub fn psnr(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Angle in degrees between the views of `camera` and the closest of
/// `references`, each taken as the unit vector toward `target`.
pub fn nearest_view_angle(camera: &Camera, references: &[Camera], target: &Point) -> Option<f64> {
    let dir = |c: &Camera| (target - c.center()).try_normalize(0.0);
    let v = dir(camera)?;
    references
        .iter()
        .filter_map(|r| dir(r).map(|u| u.cross(&v).norm().atan2(u.dot(&v)).to_degrees()))
        .min_by(f64::total_cmp)
}

/// Per-frame metrics on the masks plus means. View angles are reported
/// when train cameras are given.
pub fn evaluate(
    rendered: &[RgbImage],
    truth: &[RgbImage],
    masks: &[MaskImage],
    cameras: &[(usize, Camera)],
    train_cameras: &[Camera],
    target: &Point,
) -> Result<MetricsReport> {
    let n = rendered.len();
    if truth.len() != n || masks.len() != n || cameras.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} rendered, {} ground-truth frames, {} masks, {} cameras",
            truth.len(),
            masks.len(),
            cameras.len()
        )));
    }
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let e = image_error(&rendered[i], &truth[i], &masks[i])?;
        let (id, camera) = &cameras[i];
        frames.push(FrameMetrics {
            frame: *id,
            l1: e.l1,
            l2: e.l2,
            psnr: psnr(e.mse),
            view_angle_deg: if train_cameras.is_empty() {
                None
            } else {
                nearest_view_angle(camera, train_cameras, target)
            },
            pixels: e.pixels,
        });
    }
    let mean = |f: fn(&FrameMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            frames.iter().map(f).sum::<f64>() / n as f64
        }
    };
    Ok(MetricsReport {
        mean_l1: mean(|f| f.l1),
        mean_l2: mean(|f| f.l2),
        mean_psnr: mean(|f| f.psnr),
        frames,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrmError {
    /// Mean over masked texels of the Euclidean RGB distance.
    pub mean_l2: f64,
    /// Mean absolute difference over masked texels and channels.
    pub mean_l1: f64,
    pub texels: usize,
}

pub fn srm_error(recovered: &Panorama, truth: &Panorama, mask: &MaskImage) -> Result<SrmError> {
    let a = RgbImage::from_vec(
        recovered.width(),
        recovered.height(),
        recovered.data().to_vec(),
    );
    let b = RgbImage::from_vec(truth.width(), truth.height(), truth.data().to_vec());
    let e = image_error(&a, &b, mask)?;
    Ok(SrmError {
        mean_l2: e.l2,
        mean_l1: e.l1,
        texels: e.pixels,
    })
}

/// Mean over masked texels of the mean channel value.
pub fn mean_texel_energy(srm: &Panorama, mask: &MaskImage) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (t, &m) in srm.data().iter().zip(mask.as_slice()) {
        if m {
            sum += t.sum() / 3.0;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
