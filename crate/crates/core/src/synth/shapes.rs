//! Procedurally tessellated test meshes. All are closed and wound so that
//! face normals point out of the solid.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use crate::geometry::{Point, TriangleMesh, Vec3};

/// A mesh with a per-vertex object label.
#[derive(Debug, Clone)]
pub struct LabeledMesh {
    pub mesh: TriangleMesh,
    pub vertex_object: Vec<usize>,
}

/// Geodesic sphere from a subdivided icosahedron.
pub fn icosphere(subdivisions: u32, radius: f64, center: Point) -> TriangleMesh {
    let (dirs, faces) = unit_icosphere(subdivisions);
    let positions = dirs.iter().map(|d| center + d * radius).collect();
    TriangleMesh::new(positions, faces).expect("icosphere faces are in range")
}

/// Icosphere with a smooth radial bump pattern.
pub fn bumpy_sphere(subdivisions: u32, radius: f64, amplitude: f64) -> TriangleMesh {
    let (dirs, faces) = unit_icosphere(subdivisions);
    let positions = dirs
        .iter()
        .map(|d| {
            let theta = d.z.clamp(-1.0, 1.0).acos();
            let phi = d.y.atan2(d.x);
            let r = radius * (1.0 + amplitude * (3.0 * theta).sin() * (4.0 * phi).cos());
            Point::from(d * r)
        })
        .collect();
    TriangleMesh::new(positions, faces).expect("bumpy sphere faces are in range")
}

/// Two spheres of radius 0.6 side by side along X; object 0 at -X, object 1 at +X.
pub fn two_spheres(subdivisions: u32) -> LabeledMesh {
    let a = icosphere(subdivisions, 0.6, Point::new(-0.75, 0.0, 0.0));
    let b = icosphere(subdivisions, 0.6, Point::new(0.75, 0.0, 0.0));
    let offset = a.vertex_count() as u32;
    let mut positions = a.positions().to_vec();
    positions.extend_from_slice(b.positions());
    let mut faces = a.faces().to_vec();
    faces.extend(b.faces().iter().map(|f| f.map(|v| v + offset)));
    let mut vertex_object = vec![0; a.vertex_count()];
    vertex_object.extend(std::iter::repeat_n(1, b.vertex_count()));
    LabeledMesh {
        mesh: TriangleMesh::new(positions, faces).expect("merged faces are in range"),
        vertex_object,
    }
}

/// Hemispherical bowl opening toward +Z, modeled as a closed shell with
/// outer radius 1, inner radius 0.8 and a flat rim at z = 0.
pub fn concave_bowl(subdivisions: u32) -> TriangleMesh {
    let segments = 16 * (subdivisions as usize + 1);
    let rings = 4 * (subdivisions as usize + 1);
    let (outer_r, inner_r) = (1.0, 0.8);
    let mut positions = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    // Rings from the rim (theta = pi/2) down to just above the bottom pole.
    let ring_point = |r: f64, ring: usize, seg: usize| {
        let theta = PI / 2.0 + (PI / 2.0) * ring as f64 / rings as f64;
        let phi = TAU * seg as f64 / segments as f64;
        Point::new(
            r * theta.sin() * phi.cos(),
            r * theta.sin() * phi.sin(),
            r * theta.cos(),
        )
    };
    let mut surface = |r: f64, outward: bool, positions: &mut Vec<Point>| -> u32 {
        let base = positions.len() as u32;
        for ring in 0..rings {
            for seg in 0..segments {
                positions.push(ring_point(r, ring, seg));
            }
        }
        positions.push(Point::new(0.0, 0.0, -r));
        let pole = positions.len() as u32 - 1;
        let idx = |ring: usize, seg: usize| base + (ring * segments + seg % segments) as u32;
        let mut push = |f: [u32; 3]| {
            faces.push(if outward { f } else { [f[0], f[2], f[1]] });
        };
        for ring in 0..rings - 1 {
            for seg in 0..segments {
                let (a, b) = (idx(ring, seg), idx(ring, seg + 1));
                let (c, d) = (idx(ring + 1, seg), idx(ring + 1, seg + 1));
                push([a, c, b]);
                push([b, c, d]);
            }
        }
        for seg in 0..segments {
            push([idx(rings - 1, seg), pole, idx(rings - 1, seg + 1)]);
        }
        base
    };
    let outer = surface(outer_r, true, &mut positions);
    let inner = surface(inner_r, false, &mut positions);
    // Rim annulus facing +Z.
    for seg in 0..segments {
        let o0 = outer + seg as u32;
        let o1 = outer + ((seg + 1) % segments) as u32;
        let i0 = inner + seg as u32;
        let i1 = inner + ((seg + 1) % segments) as u32;
        faces.push([o0, o1, i0]);
        faces.push([i0, o1, i1]);
    }
    TriangleMesh::new(positions, faces).expect("bowl faces are in range")
}

fn unit_icosphere(subdivisions: u32) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}
