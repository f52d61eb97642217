//! Wavefront OBJ meshes. All objects in the file are merged into one mesh.
//! Normals are kept only when they are indexed per position; vertex colors
//! (`v x y z r g b`) become the per-vertex diffuse radiance.

use std::path::Path;

use crate::geometry::{Point, TriangleMesh, Vec3};
use crate::raster::Rgb;
use crate::{Error, Result};

pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let (models, _materials) = tobj::load_obj(path, &tobj::LoadOptions::default())
        .map_err(|e| Error::format(path, e.to_string()))?;

    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let mut faces = Vec::new();
    let mut normals_usable = true;
    let mut colors_usable = true;
    for model in &models {
        let m = &model.mesh;
        if let Some(k) = m.face_arities.iter().position(|&a| a != 3) {
            return Err(Error::NonTriangulatedMesh {
                path: path.to_path_buf(),
                message: format!(
                    "face {k} of object '{}' has {} vertices",
                    model.name, m.face_arities[k]
                ),
            });
        }
        let base = positions.len() as u32;
        positions.extend(
            m.positions
                .chunks_exact(3)
                .map(|p| Point::new(p[0] as f64, p[1] as f64, p[2] as f64)),
        );
        let count = m.positions.len() / 3;
        if m.normals.len() == m.positions.len() && m.normal_indices == m.indices {
            normals.extend(
                m.normals
                    .chunks_exact(3)
                    .map(|n| Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64)),
            );
        } else {
            normals_usable = false;
        }
        if m.vertex_color.len() == m.positions.len() {
            colors.extend(
                m.vertex_color
                    .chunks_exact(3)
                    .map(|c| Rgb::new(c[0] as f64, c[1] as f64, c[2] as f64)),
            );
        } else if count > 0 {
            colors_usable = false;
        }
        faces.extend(
            m.indices
                .chunks_exact(3)
                .map(|f| [base + f[0], base + f[1], base + f[2]]),
        );
    }
    if faces.is_empty() {
        return Err(Error::format(path, "no faces"));
    }

    let mut mesh = TriangleMesh::new(positions, faces)?;
    if normals_usable && !normals.is_empty() {
        mesh = mesh.with_normals(normals)?;
    }
    if colors_usable && !colors.is_empty() {
        mesh = mesh.with_albedo(colors)?;
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_triangles_with_colors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.obj");
        std::fs::write(
            &path,
            "v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\nv 1 1 0 1 1 1\nf 1 2 3\nf 2 4 3\n",
        )
        .unwrap();
        let mesh = read_mesh(&path).unwrap();
        assert_eq!(mesh.vertex_count(), 4);
        assert_eq!(mesh.faces(), &[[0, 1, 2], [1, 3, 2]]);
        assert_eq!(mesh.albedo()[3], Rgb::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn quads_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert!(matches!(
            read_mesh(&path),
            Err(Error::NonTriangulatedMesh { .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            read_mesh(Path::new("/nonexistent/x.obj")),
            Err(Error::MissingFile(_))
        ));
    }
}
