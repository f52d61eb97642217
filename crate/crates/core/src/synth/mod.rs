//! Ground-truth forward renderer.
//!
//! Surfaces are shaded as diffuse radiance (albedo times cosine-weighted
//! environment irradiance, evaluated per vertex and interpolated) plus a
//! visibility-masked specular term that looks up the GGX-prefiltered
//! environment along the mirror direction. This is the same image model the
//! estimator inverts, so recovered maps can be compared against
//! `specular_scale * prefilter_ggx(env, roughness)` directly.

mod environment;
mod export;
pub mod shapes;

use std::path::PathBuf;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use environment::{procedural_environment, EnvironmentKind, IrradianceMap};
pub use export::{gt_srm_file, write_synthetic, ENV_FILE, GT_ALBEDO_FILE, MESH_FILE};

use crate::frame::Frame;
use crate::geometry::{
    reflect_unchecked, secondary_ray, Camera, Culling, Intrinsics, Point, Scene, TriangleMesh, Vec3,
};
use crate::panorama::{prefilter_ggx, Panorama, MAX_ROUGHNESS, MIN_ROUGHNESS};
use crate::raster::{Rgb, RgbImage};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Sphere,
    BumpySphere,
    TwoObject,
    ConcaveBowl,
}

impl ShapeKind {
    pub fn object_count(self) -> usize {
        match self {
            ShapeKind::TwoObject => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectMaterial {
    /// GGX roughness in `[0.01, 1]`.
    pub roughness: f64,
    pub albedo: [f64; 3],
    /// Specular scale `k_s` in `[0, 1]`.
    pub specular_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingRig {
    pub count: usize,
    pub radius: f64,
    pub elevation_deg: f64,
    pub width: usize,
    pub height: usize,
    pub fov_y_deg: f64,
}

impl Default for RingRig {
    fn default() -> Self {
        Self {
            count: 30,
            radius: 3.0,
            elevation_deg: 20.0,
            width: 320,
            height: 240,
            fov_y_deg: 45.0,
        }
    }
}

impl RingRig {
    pub fn cameras(&self, target: Point) -> Result<Vec<Camera>> {
        let intrinsics = Intrinsics::from_fov(self.width, self.height, self.fov_y_deg);
        let el = self.elevation_deg.to_radians();
        (0..self.count)
            .map(|i| {
                let az = std::f64::consts::TAU * i as f64 / self.count as f64;
                let eye = target
                    + Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * self.radius;
                Camera::look_at(intrinsics, eye, target, Vec3::z())
            })
            .collect()
    }
}

/// Geometry noise applied to the mesh handed to the estimator; frames are
/// always rendered from the clean mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryNoise {
    /// Standard deviation of normal displacement, as a fraction of the
    /// bounding-box diagonal.
    pub jitter: f64,
    pub scale: f64,
    pub seed: u64,
}

impl Default for GeometryNoise {
    fn default() -> Self {
        Self {
            jitter: 0.0,
            scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub shape: ShapeKind,
    #[serde(default = "default_subdivisions")]
    pub subdivisions: u32,
    /// PFM environment; a procedural one is generated when absent.
    #[serde(default)]
    pub env_path: Option<PathBuf>,
    /// Procedural environment used when `env_path` is absent.
    #[serde(default)]
    pub environment: EnvironmentKind,
    #[serde(default = "default_env_width")]
    pub env_width: usize,
    pub objects: Vec<ObjectMaterial>,
    #[serde(default)]
    pub rig: RingRig,
    #[serde(default)]
    pub noise: GeometryNoise,
    /// Every `test_stride`-th frame is held out for testing; 0 holds out none.
    #[serde(default)]
    pub test_stride: usize,
}

fn default_subdivisions() -> u32 {
    4
}

fn default_env_width() -> usize {
    crate::panorama::DEFAULT_WIDTH
}

impl SyntheticSceneSpec {
    /// A single sphere with one material and the default ring rig.
    pub fn sphere(roughness: f64, albedo: [f64; 3], specular_scale: f64) -> Self {
        Self {
            shape: ShapeKind::Sphere,
            subdivisions: default_subdivisions(),
            env_path: None,
            environment: EnvironmentKind::default(),
            env_width: default_env_width(),
            objects: vec![ObjectMaterial {
                roughness,
                albedo,
                specular_scale,
            }],
            rig: RingRig::default(),
            noise: GeometryNoise::default(),
            test_stride: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.len() != self.shape.object_count() {
            return Err(Error::InvalidConfig(format!(
                "{:?} needs {} object materials, got {}",
                self.shape,
                self.shape.object_count(),
                self.objects.len()
            )));
        }
        for o in &self.objects {
            if !(MIN_ROUGHNESS..=MAX_ROUGHNESS).contains(&o.roughness) {
                return Err(Error::OutOfRange {
                    name: "roughness",
                    value: o.roughness,
                    min: MIN_ROUGHNESS,
                    max: MAX_ROUGHNESS,
                });
            }
            if !(0.0..=1.0).contains(&o.specular_scale) {
                return Err(Error::OutOfRange {
                    name: "specular_scale",
                    value: o.specular_scale,
                    min: 0.0,
                    max: 1.0,
                });
            }
            if o.albedo.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::InvalidConfig(
                    "object albedo must lie in [0, 1]".into(),
                ));
            }
        }
        if self.rig.count < 2 {
            return Err(Error::InvalidConfig(
                "camera ring needs at least 2 cameras".into(),
            ));
        }
        if !(self.noise.jitter >= 0.0) || !(self.noise.scale > 0.0) {
            return Err(Error::InvalidConfig(
                "noise jitter must be >= 0 and scale > 0".into(),
            ));
        }
        if self.env_width < 2 || !self.env_width.is_multiple_of(2) {
            return Err(Error::InvalidConfig("env_width must be even".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    /// Mesh handed to the estimator (perturbed when noise is requested),
    /// carrying the ground-truth diffuse radiance as albedo.
    pub mesh: TriangleMesh,
    /// Mesh the frames were rendered from.
    pub render_mesh: TriangleMesh,
    pub frames: Vec<Frame>,
    pub test_ids: Vec<usize>,
    pub env: Panorama,
    /// `specular_scale * prefilter_ggx(env, roughness)` per object.
    pub gt_srms: Vec<Panorama>,
    /// Per-vertex diffuse radiance.
    pub gt_diffuse: Vec<Rgb>,
    pub vertex_object: Vec<usize>,
}

impl SyntheticDataset {
    pub fn train_frames(&self) -> Vec<Frame> {
        self.frames
            .iter()
            .filter(|f| !self.test_ids.contains(&f.id))
            .cloned()
            .collect()
    }
}

pub fn build_shape(shape: ShapeKind, subdivisions: u32) -> shapes::LabeledMesh {
    let single = |mesh: TriangleMesh| shapes::LabeledMesh {
        vertex_object: vec![0; mesh.vertex_count()],
        mesh,
    };
    match shape {
        ShapeKind::Sphere => single(shapes::icosphere(subdivisions, 1.0, Point::origin())),
        ShapeKind::BumpySphere => single(shapes::bumpy_sphere(subdivisions, 1.0, 0.08)),
        ShapeKind::TwoObject => shapes::two_spheres(subdivisions),
        ShapeKind::ConcaveBowl => single(shapes::concave_bowl(subdivisions)),
    }
}

pub fn render_synthetic(spec: &SyntheticSceneSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let env = match &spec.env_path {
        Some(path) => crate::io::pfm::read_panorama(path)?,
        None => procedural_environment(spec.environment, spec.env_width, spec.env_width / 2)?,
    };
    let shaped = build_shape(spec.shape, spec.subdivisions);
    let irradiance = IrradianceMap::new(&env)?;

    let gt_diffuse: Vec<Rgb> = shaped
        .mesh
        .normals()
        .iter()
        .zip(&shaped.vertex_object)
        .map(|(n, &obj)| {
            let e = irradiance.lookup(n);
            Rgb::from(spec.objects[obj].albedo)
                .component_mul(&e)
                .map(|v| v.clamp(0.0, 1.0))
        })
        .collect();
    let render_mesh = shaped.mesh.clone().with_albedo(gt_diffuse.clone())?;

    let mut gt_srms: Vec<Panorama> = Vec::with_capacity(spec.objects.len());
    for (i, o) in spec.objects.iter().enumerate() {
        let cached = spec.objects[..i]
            .iter()
            .position(|p| p.roughness == o.roughness && p.specular_scale == o.specular_scale);
        let srm = match cached {
            Some(j) => gt_srms[j].clone(),
            None if o.specular_scale == 0.0 => Panorama::black(env.width(), env.height())?,
            None => {
                info!(
                    "prefiltering {}x{} environment at roughness {}",
                    env.width(),
                    env.height(),
                    o.roughness
                );
                let mut p = prefilter_ggx(&env, o.roughness)?;
                for t in p.data_mut() {
                    *t *= o.specular_scale;
                }
                p
            }
        };
        gt_srms.push(srm);
    }

    let face_object: Vec<usize> = render_mesh
        .faces()
        .iter()
        .map(|f| shaped.vertex_object[f[0] as usize])
        .collect();
    let scene = Scene::new(render_mesh);
    let cameras = spec.rig.cameras(scene.mesh().centroid())?;
    let frames: Vec<Frame> = cameras
        .into_par_iter()
        .enumerate()
        .map(|(id, camera)| Frame {
            id,
            image: render_view(&scene, &camera, &face_object, &gt_srms),
            camera,
        })
        .collect();
    let test_ids = if spec.test_stride > 0 {
        (0..frames.len())
            .filter(|i| i % spec.test_stride == spec.test_stride - 1)
            .collect()
    } else {
        Vec::new()
    };

    let render_mesh = scene.into_mesh();
    let mesh = if spec.noise.jitter > 0.0 || spec.noise.scale != 1.0 {
        perturb_geometry(
            &render_mesh,
            spec.noise.jitter,
            spec.noise.scale,
            spec.noise.seed,
        )?
    } else {
        render_mesh.clone()
    };
    Ok(SyntheticDataset {
        mesh,
        render_mesh,
        frames,
        test_ids,
        env,
        gt_srms,
        gt_diffuse,
        vertex_object: shaped.vertex_object,
    })
}

/// Renders one view of `scene`, whose albedo holds diffuse radiance. Faces
/// of object `k` reflect `srms[k]`.
pub fn render_view(
    scene: &Scene,
    camera: &Camera,
    face_object: &[usize],
    srms: &[Panorama],
) -> RgbImage {
    let (w, h) = (camera.width(), camera.height());
    let eps = scene.secondary_epsilon();
    let data: Vec<Rgb> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let ray = camera.pixel_ray(i % w, i / w);
            let Some(hit) = scene.intersect(&ray, 0.0, f64::INFINITY) else {
                return Rgb::zeros();
            };
            let n = if ray.dir.dot(&hit.normal) > 0.0 {
                -hit.normal
            } else {
                hit.normal
            };
            let mirror = reflect_unchecked(&ray.dir, &n);
            let escaped = !scene.bvh().occluded(
                &secondary_ray(&hit.position, &n, &hit.face_normal, &mirror, eps),
                eps,
                f64::INFINITY,
                Culling::BackFaces,
            );
            let specular = if escaped {
                srms[face_object[hit.face]].lookup(&mirror)
            } else {
                Rgb::zeros()
            };
            hit.albedo + specular
        })
        .collect();
    RgbImage::from_vec(w, h, data)
}

/// Scales the mesh about its centroid by `scale`, then moves each vertex
/// along its normal by Gaussian noise with standard deviation
/// `jitter * diagonal`. Normals are recomputed from the result.
pub fn perturb_geometry(
    mesh: &TriangleMesh,
    jitter: f64,
    scale: f64,
    seed: u64,
) -> Result<TriangleMesh> {
    if !(jitter >= 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidConfig(
            "jitter must be >= 0 and scale > 0".into(),
        ));
    }
    if jitter == 0.0 && scale == 1.0 {
        return Ok(mesh.clone());
    }
    let c = mesh.centroid();
    let scaled: Vec<Point> = mesh
        .positions()
        .iter()
        .map(|p| c + (p - c) * scale)
        .collect();
    let sigma = jitter * mesh.diagonal() * scale;
    let positions = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma is positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        scaled
            .iter()
            .zip(mesh.normals())
            .map(|(p, n)| p + n * normal.sample(&mut rng))
            .collect()
    } else {
        scaled
    };
    Ok(mesh.with_positions(positions))
}
