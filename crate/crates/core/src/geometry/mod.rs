//! Meshes, cameras, rays and ray casting.

mod bvh;
mod camera;
mod mesh;

pub use bvh::{Bvh, Culling, TriangleHit};
pub use camera::{Camera, Intrinsics};
pub use mesh::TriangleMesh;

use nalgebra::{Point3, Vector3};

use crate::raster::Rgb;
use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Point = Point3<f64>;

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point,
    pub dir: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `dir`.
    pub fn new(origin: Point, dir: Vec3) -> Self {
        Self {
            origin,
            dir: dir.normalize(),
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Point {
        self.origin + self.dir * t
    }
}

/// Mirror reflection of an incident direction (pointing toward the surface)
/// about a unit normal: `d - 2 (d . n) n`.
pub fn reflect(incident: &Vec3, normal: &Vec3) -> Result<Vec3> {
    for v in [incident, normal] {
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitVector { norm });
        }
    }
    Ok(reflect_unchecked(incident, normal))
}

#[inline]
pub(crate) fn reflect_unchecked(incident: &Vec3, normal: &Vec3) -> Vec3 {
    incident - normal * (2.0 * incident.dot(normal))
}

/// Smallest cosine between a secondary ray and the plane of the triangle it
/// leaves from.
const MIN_SECONDARY_ELEVATION: f64 = 1e-3;

/// Ray that tests what `dir` sees from a surface point. It starts `eps`
/// above the point along the shading normal. Interpolated normals can send
/// `dir` below the plane of the triangle itself, where it would clip the
/// neighbouring faces of a tessellated smooth surface; such directions are
/// lifted just above that plane. The result only decides visibility, the
/// lookup direction stays `dir`.
pub fn secondary_ray(
    position: &Point,
    shading_normal: &Vec3,
    face_normal: &Vec3,
    dir: &Vec3,
    eps: f64,
) -> Ray {
    let nf = if face_normal.dot(shading_normal) < 0.0 {
        -face_normal
    } else {
        *face_normal
    };
    let elevation = dir.dot(&nf);
    let d = if elevation < MIN_SECONDARY_ELEVATION {
        dir + nf * (MIN_SECONDARY_ELEVATION - elevation)
    } else {
        *dir
    };
    Ray::new(position + shading_normal * eps, d)
}

/// A ray-mesh intersection with interpolated surface attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub face: usize,
    pub barycentric: [f64; 3],
    pub position: Point,
    /// Interpolated, renormalized vertex normal (winding orientation).
    pub normal: Vec3,
    /// Geometric face normal (winding orientation).
    pub face_normal: Vec3,
    pub albedo: Rgb,
}

/// A mesh together with its acceleration structure.
///
/// Geometry is frozen at construction; per-vertex albedo and material logits
/// may still be replaced since they do not affect ray casting.
#[derive(Debug, Clone)]
pub struct Scene {
    mesh: TriangleMesh,
    bvh: Bvh,
    diagonal: f64,
}

impl Scene {
    pub fn new(mesh: TriangleMesh) -> Self {
        let bvh = Bvh::build(&mesh);
        let diagonal = mesh.diagonal();
        Self {
            mesh,
            bvh,
            diagonal,
        }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn into_mesh(self) -> TriangleMesh {
        self.mesh
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }

    /// Offset used for secondary rays leaving the surface.
    pub fn secondary_epsilon(&self) -> f64 {
        1e-4 * self.diagonal
    }

    pub fn set_albedo(&mut self, albedo: Vec<Rgb>) -> Result<()> {
        self.mesh.set_albedo(albedo)
    }

    pub fn set_logits(&mut self, material_count: usize, logits: Vec<f64>) -> Result<()> {
        self.mesh.set_logits(material_count, logits)
    }

    pub fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
        self.intersect_culled(ray, t_min, t_max, Culling::None)
    }

    pub fn intersect_culled(
        &self,
        ray: &Ray,
        t_min: f64,
        t_max: f64,
        culling: Culling,
    ) -> Option<Hit> {
        let hit = self.bvh.intersect(ray, t_min, t_max, culling)?;
        Some(self.resolve(ray, hit))
    }

    fn resolve(&self, ray: &Ray, hit: TriangleHit) -> Hit {
        let mesh = &self.mesh;
        Hit {
            t: hit.t,
            face: hit.face,
            barycentric: hit.barycentric,
            position: ray.at(hit.t),
            normal: mesh.interpolate_normal(hit.face, &hit.barycentric),
            face_normal: self.bvh.face_normal(hit.face),
            albedo: mesh.interpolate_albedo(hit.face, &hit.barycentric),
        }
    }
}
