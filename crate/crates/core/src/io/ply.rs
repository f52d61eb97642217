//! PLY meshes. Output is binary little-endian with double-precision
//! positions and normals and 16-bit vertex colors holding the diffuse
//! radiance. Input accepts ASCII or binary files with 8-bit, 16-bit or
//! floating point colors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};

use crate::geometry::{Point, TriangleMesh, Vec3};
use crate::raster::Rgb;
use crate::{Error, Result};

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn color(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::UChar(v) => v as f64 / 255.0,
        Property::UShort(v) => v as f64 / 65535.0,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<i64>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListUChar(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListShort(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListUShort(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListInt(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListUInt(v) => v.iter().map(|&i| i as i64).collect(),
        _ => return None,
    })
}

pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let ply = Parser::<DefaultElement>::new()
        .read_ply(&mut reader)
        .map_err(|e| Error::format(path, e.to_string()))?;

    let vertices = ply
        .payload
        .get("vertex")
        .ok_or_else(|| Error::format(path, "no vertex element"))?;
    let faces_raw = ply
        .payload
        .get("face")
        .ok_or_else(|| Error::format(path, "no face element"))?;

    let field = |e: &DefaultElement, key: &str, i: usize| -> Result<f64> {
        e.get(key)
            .and_then(scalar)
            .ok_or_else(|| Error::format(path, format!("vertex {i} lacks numeric '{key}'")))
    };

    let mut positions = Vec::with_capacity(vertices.len());
    let mut normals = Vec::new();
    let mut albedo = Vec::new();
    let has_normals = vertices.first().is_some_and(|v| v.contains_key("nx"));
    let has_colors = vertices.first().is_some_and(|v| v.contains_key("red"));
    for (i, v) in vertices.iter().enumerate() {
        positions.push(Point::new(
            field(v, "x", i)?,
            field(v, "y", i)?,
            field(v, "z", i)?,
        ));
        if has_normals {
            normals.push(Vec3::new(
                field(v, "nx", i)?,
                field(v, "ny", i)?,
                field(v, "nz", i)?,
            ));
        }
        if has_colors {
            let c = |key: &str| {
                v.get(key)
                    .and_then(color)
                    .ok_or_else(|| Error::format(path, format!("vertex {i} has a bad '{key}'")))
            };
            albedo.push(Rgb::new(c("red")?, c("green")?, c("blue")?));
        }
    }

    let mut faces = Vec::with_capacity(faces_raw.len());
    for (i, f) in faces_raw.iter().enumerate() {
        let list = f
            .get("vertex_indices")
            .or_else(|| f.get("vertex_index"))
            .and_then(index_list)
            .ok_or_else(|| Error::format(path, format!("face {i} has no vertex index list")))?;
        if list.len() != 3 {
            return Err(Error::NonTriangulatedMesh {
                path: path.to_path_buf(),
                message: format!("face {i} has {} vertices", list.len()),
            });
        }
        let mut tri = [0u32; 3];
        for (k, &idx) in list.iter().enumerate() {
            tri[k] = u32::try_from(idx)
                .map_err(|_| Error::format(path, format!("face {i} has index {idx}")))?;
        }
        faces.push(tri);
    }

    let mut mesh = TriangleMesh::new(positions, faces)?;
    if has_normals {
        mesh = mesh.with_normals(normals)?;
    }
    if has_colors {
        mesh = mesh.with_albedo(albedo)?;
    }
    Ok(mesh)
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

pub fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    // Written by hand: the ply-rs writer emits a wrong length prefix for
    // binary list properties.
    let header = format!(
        "ply\nformat binary_little_endian 1.0\ncomment speclight\n\
         element vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property double nx\nproperty double ny\nproperty double nz\n\
         property ushort red\nproperty ushort green\nproperty ushort blue\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.face_count()
    );
    let mut bytes = header.into_bytes();
    bytes.reserve(mesh.vertex_count() * 54 + mesh.face_count() * 13);
    for ((p, n), c) in mesh
        .positions()
        .iter()
        .zip(mesh.normals())
        .zip(mesh.albedo())
    {
        for v in [p.x, p.y, p.z, n.x, n.y, n.z] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for v in [c.x, c.y, c.z] {
            bytes.extend_from_slice(&quantize16(v).to_le_bytes());
        }
    }
    for f in mesh.faces() {
        bytes.push(3);
        for &i in f {
            bytes.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_mesh() -> TriangleMesh {
        let positions = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
            Point::new(0.0, 1.0, 0.25),
        ];
        TriangleMesh::new(positions, vec![[0, 1, 2], [0, 2, 3]])
            .unwrap()
            .with_albedo(vec![
                Rgb::new(0.1, 0.2, 0.3),
                Rgb::new(1.0, 0.0, 0.5),
                Rgb::new(0.7, 0.7, 0.7),
                Rgb::new(0.0, 0.0, 1.0),
            ])
            .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ply");
        let mesh = quad_mesh();
        write_mesh(&path, &mesh).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.positions(), mesh.positions());
        assert_eq!(back.faces(), mesh.faces());
        for (a, b) in back.normals().iter().zip(mesh.normals()) {
            assert!((a - b).norm() < 1e-12);
        }
        for (a, b) in back.albedo().iter().zip(mesh.albedo()) {
            assert!((a - b).amax() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn ascii_with_uchar_colors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
             property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n\
             element face 1\nproperty list uchar int vertex_indices\nend_header\n\
             0 0 0 255 0 0\n1 0 0 0 255 0\n0 1 0 0 0 255\n3 0 1 2\n",
        )
        .unwrap();
        let mesh = read_mesh(&path).unwrap();
        assert_eq!(mesh.face_count(), 1);
        assert_eq!(mesh.albedo()[1], Rgb::new(0.0, 1.0, 0.0));
        assert!((mesh.normals()[0] - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn quads_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n\
             property float z\nelement face 1\nproperty list uchar int vertex_indices\n\
             end_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n",
        )
        .unwrap();
        assert!(matches!(
            read_mesh(&path),
            Err(Error::NonTriangulatedMesh { .. })
        ));
    }
}
