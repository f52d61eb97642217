//! Per-view physically motivated images: diffuse, specular, reflection
//! directions, visibility, first-bounce color and Fresnel coefficients.

use rayon::prelude::*;

use crate::geometry::{reflect_unchecked, secondary_ray, Camera, Culling, Point, Ray, Scene, Vec3};
use crate::panorama::Panorama;
use crate::raster::{MaskImage, Rgb, RgbImage, ScalarImage};
use crate::{Error, Result};

/// Numerically stable softmax of `logits` into `out`.
pub fn softmax(logits: &[f64], out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Schlick's `(1 - cos a)^5` with `cos a` clamped to `[0, 1]`.
#[inline]
pub fn fresnel_coefficient(cos_alpha: f64) -> f64 {
    (1.0 - cos_alpha.clamp(0.0, 1.0)).powi(5)
}

/// Geometry of one covered pixel, independent of albedo, logits and SRMs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub pixel: usize,
    pub face: usize,
    pub barycentric: [f64; 3],
    /// Distance from the camera center along `view_dir`.
    pub depth: f64,
    /// Unit direction from the camera center toward the surface.
    pub view_dir: Vec3,
    /// Interpolated normal, flipped to face the camera.
    pub normal: Vec3,
    /// Mirror reflection of `view_dir` about `normal`.
    pub reflected: Vec3,
    /// Face and barycentric coordinates where the reflected ray first hits
    /// the mesh; `None` when it escapes to the environment.
    pub bounce: Option<(usize, [f64; 3])>,
}

impl SurfaceSample {
    #[inline]
    pub fn visible(&self) -> bool {
        self.bounce.is_none()
    }

    #[inline]
    pub fn cos_alpha(&self) -> f64 {
        -self.view_dir.dot(&self.normal)
    }
}

/// All covered pixels of one view, in row-major pixel order.
#[derive(Debug, Clone)]
pub struct ViewTrace {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<SurfaceSample>,
}

/// Casts the primary ray of every pixel and one mirror bounce from each hit.
///
/// Reflected rays start `secondary_epsilon` above the surface and ignore
/// back-facing triangles.
pub fn trace_view(scene: &Scene, camera: &Camera) -> ViewTrace {
    let (w, h) = (camera.width(), camera.height());
    let eps = scene.secondary_epsilon();
    let rows: Vec<Vec<SurfaceSample>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::new();
            for x in 0..w {
                let ray = camera.pixel_ray(x, y);
                let Some(hit) = scene.intersect(&ray, 0.0, f64::INFINITY) else {
                    continue;
                };
                let d = ray.dir;
                let n = if d.dot(&hit.normal) > 0.0 {
                    -hit.normal
                } else {
                    hit.normal
                };
                let reflected = reflect_unchecked(&d, &n);
                let secondary = secondary_ray(&hit.position, &n, &hit.face_normal, &reflected, eps);
                let bounce = scene
                    .bvh()
                    .intersect(&secondary, eps, f64::INFINITY, Culling::BackFaces)
                    .map(|b| (b.face, b.barycentric));
                row.push(SurfaceSample {
                    pixel: y * w + x,
                    face: hit.face,
                    barycentric: hit.barycentric,
                    depth: hit.t,
                    view_dir: d,
                    normal: n,
                    reflected,
                    bounce,
                });
            }
            row
        })
        .collect();
    ViewTrace {
        width: w,
        height: h,
        samples: rows.into_iter().flatten().collect(),
    }
}

/// Component images of one view. Uncovered pixels are zero everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderComponents {
    pub coverage: MaskImage,
    /// Interpolated per-vertex diffuse radiance.
    pub diffuse: RgbImage,
    /// Visibility-masked blend of basis SRM lookups, before any Fresnel term.
    pub specular: RgbImage,
    /// Mirror reflection directions.
    pub reflection: RgbImage,
    pub visibility: MaskImage,
    pub first_bounce: RgbImage,
    pub fresnel: ScalarImage,
    pub view_dir: RgbImage,
    pub normal: RgbImage,
    /// Distance along the primary ray; zero where uncovered.
    pub depth: ScalarImage,
    pub material_count: usize,
    /// Blend weights, `material_count` per pixel, row-major.
    pub weights: Vec<f64>,
}

impl RenderComponents {
    pub fn width(&self) -> usize {
        self.coverage.width()
    }

    pub fn height(&self) -> usize {
        self.coverage.height()
    }

    pub fn pixel_weights(&self, pixel: usize) -> &[f64] {
        let m = self.material_count;
        &self.weights[pixel * m..(pixel + 1) * m]
    }

    pub fn covered_count(&self) -> usize {
        self.coverage.as_slice().iter().filter(|&&c| c).count()
    }
}

pub fn render_components(
    scene: &Scene,
    srms: &[Panorama],
    camera: &Camera,
) -> Result<RenderComponents> {
    let m = scene.mesh().material_count();
    if srms.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} SRMs for {} material logits per vertex",
            srms.len(),
            m
        )));
    }
    Ok(shade(&trace_view(scene, camera), scene, srms))
}

/// Evaluates the component images of a traced view with the scene's current
/// albedo and logits.
pub fn shade(trace: &ViewTrace, scene: &Scene, srms: &[Panorama]) -> RenderComponents {
    let mesh = scene.mesh();
    let m = srms.len();
    let (w, h) = (trace.width, trace.height);
    let mut out = RenderComponents {
        coverage: MaskImage::filled(w, h, false),
        diffuse: RgbImage::black(w, h),
        specular: RgbImage::black(w, h),
        reflection: RgbImage::black(w, h),
        visibility: MaskImage::filled(w, h, false),
        first_bounce: RgbImage::black(w, h),
        fresnel: ScalarImage::filled(w, h, 0.0),
        view_dir: RgbImage::black(w, h),
        normal: RgbImage::black(w, h),
        depth: ScalarImage::filled(w, h, 0.0),
        material_count: m,
        weights: vec![0.0; w * h * m],
    };
    let mut logits = vec![0.0; m];
    for s in &trace.samples {
        let p = s.pixel;
        out.coverage.as_mut_slice()[p] = true;
        out.diffuse.as_mut_slice()[p] = mesh.interpolate_albedo(s.face, &s.barycentric);
        out.reflection.as_mut_slice()[p] = s.reflected;
        out.view_dir.as_mut_slice()[p] = s.view_dir;
        out.normal.as_mut_slice()[p] = s.normal;
        out.depth.as_mut_slice()[p] = s.depth;
        out.fresnel.as_mut_slice()[p] = fresnel_coefficient(s.cos_alpha());

        let weights = &mut out.weights[p * m..(p + 1) * m];
        if m > 0 {
            mesh.interpolate_logits(s.face, &s.barycentric, &mut logits);
            softmax(&logits, weights);
        }
        match s.bounce {
            None => {
                out.visibility.as_mut_slice()[p] = true;
                out.specular.as_mut_slice()[p] = weights
                    .iter()
                    .zip(srms)
                    .fold(Rgb::zeros(), |acc, (wi, srm)| {
                        acc + srm.lookup(&s.reflected) * *wi
                    });
            }
            Some((face, bary)) => {
                out.first_bounce.as_mut_slice()[p] = mesh.interpolate_albedo(face, &bary);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositeMode {
    /// `D + S`.
    Plain,
    /// `D + (r0 + (1 - r0) FCI) S`.
    Fresnel,
}

/// Combines diffuse and specular images into a predicted view, clamped to `[0, 1]`.
pub fn composite(components: &RenderComponents, mode: CompositeMode, r0: f64) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&r0) {
        return Err(Error::OutOfRange {
            name: "r0",
            value: r0,
            min: 0.0,
            max: 1.0,
        });
    }
    let d = components.diffuse.as_slice();
    let s = components.specular.as_slice();
    let f = components.fresnel.as_slice();
    let data = (0..d.len())
        .map(|i| {
            let scale = match mode {
                CompositeMode::Plain => 1.0,
                CompositeMode::Fresnel => r0 + (1.0 - r0) * f[i],
            };
            (d[i] + s[i] * scale).map(|v| v.clamp(0.0, 1.0))
        })
        .collect();
    Ok(RgbImage::from_vec(
        components.width(),
        components.height(),
        data,
    ))
}

/// Agreement of material weights and diffuse values between two views.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConsistencyReport {
    pub compared: usize,
    /// Mean over compared pixels and materials of `|W_A - W_B|`.
    pub mean_weight_diff: f64,
    /// Mean over compared pixels and channels of `|D_A - D_B|`.
    pub mean_diffuse_diff: f64,
}

impl ConsistencyReport {
    pub fn is_empty(&self) -> bool {
        self.compared == 0
    }
}

/// Warps view A's material weights and diffuse values into view B through
/// the mesh and compares them on pixels visible from both cameras.
///
/// Each covered pixel of B is lifted to its surface point using B's depth,
/// projected into A, and depth-tested against the first hit of A's ray to
/// that point. A's values are taken at that exact surface point, so any
/// difference reflects view-dependent prediction rather than resampling.
pub fn cross_project(
    a: &RenderComponents,
    camera_a: &Camera,
    b: &RenderComponents,
    camera_b: &Camera,
    scene: &Scene,
) -> Result<ConsistencyReport> {
    let mesh = scene.mesh();
    let m = mesh.material_count();
    if a.material_count != m || b.material_count != m {
        return Err(Error::DimensionMismatch(
            "component weights do not match the mesh material count".into(),
        ));
    }
    // The lifted point comes from a traced depth and lies on the surface to
    // rounding. A looser tolerance lets rays that pass just in front of a
    // silhouette stop on a different surface point and still be accepted.
    let tolerance = 1e-9 * scene.diagonal();
    let center_a = camera_a.center();
    let center_b = camera_b.center();
    let mut logits = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let (mut count, mut dw, mut dd) = (0usize, 0.0, 0.0);
    for (p, &covered) in b.coverage.as_slice().iter().enumerate() {
        if !covered {
            continue;
        }
        let x: Point = center_b + b.view_dir.as_slice()[p] * b.depth.as_slice()[p];
        let Some((u, v)) = camera_a.project(&x) else {
            continue;
        };
        if !*a.coverage.get(u as usize, v as usize) {
            continue;
        }
        let to_x = x - center_a;
        let dist = to_x.norm();
        let Some(hit) = scene.intersect(&Ray::new(center_a, to_x), 0.0, f64::INFINITY) else {
            continue;
        };
        if (hit.t - dist).abs() > tolerance {
            continue;
        }
        if m > 0 {
            mesh.interpolate_logits(hit.face, &hit.barycentric, &mut logits);
            softmax(&logits, &mut weights);
            dw += weights
                .iter()
                .zip(b.pixel_weights(p))
                .map(|(wa, wb)| (wa - wb).abs())
                .sum::<f64>()
                / m as f64;
        }
        dd += (hit.albedo - b.diffuse.as_slice()[p]).abs().sum() / 3.0;
        count += 1;
    }
    if count == 0 {
        return Ok(ConsistencyReport::default());
    }
    Ok(ConsistencyReport {
        compared: count,
        mean_weight_diff: dw / count as f64,
        mean_diffuse_diff: dd / count as f64,
    })
}
