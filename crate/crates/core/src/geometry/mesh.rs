use std::collections::BTreeSet;

use super::{Point, Vec3};
use crate::raster::Rgb;
use crate::{Error, Result};

/// Indexed triangle mesh with per-vertex shading attributes.
///
/// Albedo is the view-independent (diffuse) radiance of each vertex. Material
/// logits are stored vertex-major, `material_count` values per vertex; their
/// softmax gives the blend weights of the basis reflectance maps.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    positions: Vec<Point>,
    faces: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
    albedo: Vec<Rgb>,
    material_count: usize,
    logits: Vec<f64>,
}

impl TriangleMesh {
    /// Builds a mesh with area-weighted vertex normals, zero albedo and no
    /// material logits.
    pub fn new(positions: Vec<Point>, faces: Vec<[u32; 3]>) -> Result<Self> {
        check_faces(positions.len(), &faces)?;
        let normals = area_weighted_normals(&positions, &faces);
        let n = positions.len();
        Ok(Self {
            positions,
            faces,
            normals,
            albedo: vec![Rgb::zeros(); n],
            material_count: 0,
            logits: Vec::new(),
        })
    }

    /// Replaces the vertex normals. Inputs are renormalized; zero-length
    /// normals are rejected.
    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.positions.len() {
            return Err(Error::InvalidMesh(format!(
                "{} normals for {} vertices",
                normals.len(),
                self.positions.len()
            )));
        }
        let mut out = Vec::with_capacity(normals.len());
        for (i, n) in normals.into_iter().enumerate() {
            let len = n.norm();
            if !(len > 1e-12) || !len.is_finite() {
                return Err(Error::InvalidMesh(format!(
                    "vertex {i} has a degenerate normal"
                )));
            }
            out.push(n / len);
        }
        self.normals = out;
        Ok(self)
    }

    pub fn with_albedo(mut self, albedo: Vec<Rgb>) -> Result<Self> {
        self.set_albedo(albedo)?;
        Ok(self)
    }

    pub fn set_albedo(&mut self, albedo: Vec<Rgb>) -> Result<()> {
        if albedo.len() != self.positions.len() {
            return Err(Error::InvalidMesh(format!(
                "{} albedo entries for {} vertices",
                albedo.len(),
                self.positions.len()
            )));
        }
        if let Some(i) = albedo
            .iter()
            .position(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::InvalidMesh(format!(
                "albedo of vertex {i} is outside [0, 1]"
            )));
        }
        self.albedo = albedo;
        Ok(())
    }

    pub fn set_logits(&mut self, material_count: usize, logits: Vec<f64>) -> Result<()> {
        if material_count == 0 || logits.len() != material_count * self.positions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} logits for {} vertices x {} materials",
                logits.len(),
                self.positions.len(),
                material_count
            )));
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidMesh("non-finite material logit".into()));
        }
        self.material_count = material_count;
        self.logits = logits;
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn albedo(&self) -> &[Rgb] {
        &self.albedo
    }

    pub fn material_count(&self) -> usize {
        self.material_count
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn vertex_logits(&self, vertex: usize) -> &[f64] {
        let m = self.material_count;
        &self.logits[vertex * m..(vertex + 1) * m]
    }

    #[inline]
    pub fn face_vertices(&self, face: usize) -> [usize; 3] {
        let [a, b, c] = self.faces[face];
        [a as usize, b as usize, c as usize]
    }

    pub fn interpolate_normal(&self, face: usize, bary: &[f64; 3]) -> Vec3 {
        let [a, b, c] = self.face_vertices(face);
        let n = self.normals[a] * bary[0] + self.normals[b] * bary[1] + self.normals[c] * bary[2];
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            self.normals[a]
        }
    }

    pub fn interpolate_albedo(&self, face: usize, bary: &[f64; 3]) -> Rgb {
        let [a, b, c] = self.face_vertices(face);
        self.albedo[a] * bary[0] + self.albedo[b] * bary[1] + self.albedo[c] * bary[2]
    }

    /// Writes the barycentric blend of the three corner logit vectors into `out`.
    pub fn interpolate_logits(&self, face: usize, bary: &[f64; 3], out: &mut [f64]) {
        let m = self.material_count;
        debug_assert_eq!(out.len(), m);
        let [a, b, c] = self.face_vertices(face);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.logits[a * m + i] * bary[0]
                + self.logits[b * m + i] * bary[1]
                + self.logits[c * m + i] * bary[2];
        }
    }

    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.positions {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// Length of the bounding-box diagonal.
    pub fn diagonal(&self) -> f64 {
        if self.positions.is_empty() {
            return 0.0;
        }
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    /// Mean vertex position.
    pub fn centroid(&self) -> Point {
        let n = self.positions.len().max(1) as f64;
        let sum = self
            .positions
            .iter()
            .fold(Vec3::zeros(), |acc, p| acc + p.coords);
        Point::from(sum / n)
    }

    /// Unique undirected edges, sorted, each as `(low, high)` vertex indices.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut set = BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        check_faces(self.positions.len(), &self.faces)?;
        if self.normals.len() != self.positions.len() || self.albedo.len() != self.positions.len() {
            return Err(Error::InvalidMesh("attribute count mismatch".into()));
        }
        if let Some(i) = self
            .normals
            .iter()
            .position(|n| (n.norm() - 1.0).abs() > 1e-6)
        {
            return Err(Error::InvalidMesh(format!(
                "normal of vertex {i} is not unit length"
            )));
        }
        if self
            .albedo
            .iter()
            .any(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::InvalidMesh("albedo outside [0, 1]".into()));
        }
        if self.logits.len() != self.material_count * self.positions.len() {
            return Err(Error::InvalidMesh("logit count mismatch".into()));
        }
        Ok(())
    }

    /// Replaces vertex positions (same topology) and recomputes normals.
    pub(crate) fn with_positions(&self, positions: Vec<Point>) -> Self {
        debug_assert_eq!(positions.len(), self.positions.len());
        let normals = area_weighted_normals(&positions, &self.faces);
        Self {
            positions,
            normals,
            ..self.clone()
        }
    }
}

fn check_faces(vertex_count: usize, faces: &[[u32; 3]]) -> Result<()> {
    for (i, f) in faces.iter().enumerate() {
        if f.iter().any(|&v| v as usize >= vertex_count) {
            return Err(Error::InvalidMesh(format!(
                "face {i} references a vertex out of range ({vertex_count} vertices)"
            )));
        }
    }
    Ok(())
}

/// Sum of unnormalized face normals (twice the area-weighted normal) per
/// vertex, renormalized. Isolated vertices get +Z.
fn area_weighted_normals(positions: &[Point], faces: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); positions.len()];
    for f in faces {
        let [a, b, c] = [f[0] as usize, f[1] as usize, f[2] as usize];
        let n = (positions[b] - positions[a]).cross(&(positions[c] - positions[a]));
        acc[a] += n;
        acc[b] += n;
        acc[c] += n;
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::z()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(1.0, 1.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn normals_follow_winding() {
        let m = quad();
        for n in m.normals() {
            assert!((n - Vec3::z()).norm() < 1e-12);
        }
        m.validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_faces() {
        let err = TriangleMesh::new(vec![Point::origin(); 2], vec![[0, 1, 2]]);
        assert!(matches!(err, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn rejects_albedo_outside_unit_interval() {
        let mut m = quad();
        let mut albedo = vec![Rgb::repeat(0.5); 4];
        albedo[2].y = 1.5;
        assert!(m.set_albedo(albedo).is_err());
    }

    #[test]
    fn logits_must_match_vertex_count() {
        let mut m = quad();
        assert!(m.set_logits(2, vec![0.0; 7]).is_err());
        m.set_logits(2, vec![0.0; 8]).unwrap();
        assert_eq!(m.vertex_logits(3), &[0.0, 0.0]);
    }

    #[test]
    fn edges_are_unique() {
        assert_eq!(quad().edges(), vec![(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn diagonal_of_unit_quad() {
        assert!((quad().diagonal() - 2f64.sqrt()).abs() < 1e-12);
    }
}
