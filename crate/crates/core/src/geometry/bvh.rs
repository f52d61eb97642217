//! Bounding volume hierarchy over mesh triangles.
//!
//! Built by median split of triangle centroids along the longest axis of
//! their bounds; leaves hold at most four triangles. The build is fully
//! deterministic for a given mesh.

use super::{Ray, TriangleMesh, Vec3};

const LEAF_SIZE: usize = 4;

/// Which triangle orientations a query may hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Culling {
    None,
    /// Ignore triangles whose winding normal faces along the ray.
    BackFaces,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub t: f64,
    pub face: usize,
    /// Weights of the face's three corners; they sum to one.
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    /// Slab test; returns the entry distance when the box overlaps `[t_min, t_max]`.
    #[inline]
    fn hit(&self, origin: &Vec3, inv_dir: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf compares false and leaves the interval unchanged.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: index of first entry in `order`. Interior: index of right child
    /// (left child immediately follows the node).
    offset: u32,
    /// Number of triangles in a leaf; zero for interior nodes.
    count: u32,
}

#[derive(Debug, Clone, Copy)]
struct Triangle {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    triangles: Vec<Triangle>,
    face_normals: Vec<Vec3>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let p = mesh.positions();
        let triangles: Vec<Triangle> = mesh
            .faces()
            .iter()
            .map(|f| {
                let v0 = p[f[0] as usize].coords;
                Triangle {
                    v0,
                    e1: p[f[1] as usize].coords - v0,
                    e2: p[f[2] as usize].coords - v0,
                }
            })
            .collect();
        let face_normals = triangles
            .iter()
            .map(|t| {
                let n = t.e1.cross(&t.e2);
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::z()
                }
            })
            .collect();
        let bounds: Vec<Aabb> = triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                b.grow(&t.v0);
                b.grow(&(t.v0 + t.e1));
                b.grow(&(t.v0 + t.e2));
                b
            })
            .collect();
        let centroids: Vec<Vec3> = bounds.iter().map(|b| (b.min + b.max) * 0.5).collect();

        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            build_node(&mut nodes, &mut order, 0, &bounds, &centroids);
        }
        Self {
            nodes,
            order,
            triangles,
            face_normals,
        }
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        self.face_normals[face]
    }

    /// Nearest intersection with `t` in `(t_min, t_max]`.
    pub fn intersect(
        &self,
        ray: &Ray,
        t_min: f64,
        t_max: f64,
        culling: Culling,
    ) -> Option<TriangleHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let origin = ray.origin.coords;
        let inv_dir = ray.dir.map(|d| 1.0 / d);
        let mut best: Option<TriangleHit> = None;
        let mut t_best = t_max;
        let mut stack = [0u32; 64];
        let mut top = 1usize;
        while top > 0 {
            top -= 1;
            let index = stack[top];
            let node = &self.nodes[index as usize];
            let Some(entry) = node.bounds.hit(&origin, &inv_dir, t_min, t_best) else {
                continue;
            };
            if entry > t_best {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                for &face in &self.order[start..start + node.count as usize] {
                    let tri = &self.triangles[face as usize];
                    if let Some((t, u, v)) = intersect_triangle(tri, &origin, &ray.dir, culling) {
                        if t > t_min && t <= t_best {
                            t_best = t;
                            best = Some(TriangleHit {
                                t,
                                face: face as usize,
                                barycentric: [1.0 - u - v, u, v],
                            });
                        }
                    }
                }
            } else {
                stack[top] = node.offset;
                stack[top + 1] = index + 1;
                top += 2;
            }
        }
        best
    }

    /// True when anything lies along the ray within `(t_min, t_max]`.
    pub fn occluded(&self, ray: &Ray, t_min: f64, t_max: f64, culling: Culling) -> bool {
        self.intersect(ray, t_min, t_max, culling).is_some()
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    offset: usize,
    bounds: &[Aabb],
    centroids: &[Vec3],
) -> usize {
    let mut node_bounds = Aabb::empty();
    let mut centroid_bounds = Aabb::empty();
    for &i in order.iter() {
        node_bounds.merge(&bounds[i as usize]);
        centroid_bounds.grow(&centroids[i as usize]);
    }
    let index = nodes.len();
    nodes.push(Node {
        bounds: node_bounds,
        offset: offset as u32,
        count: order.len() as u32,
    });
    if order.len() <= LEAF_SIZE {
        return index;
    }

    let extent = centroid_bounds.max - centroid_bounds.min;
    let axis = extent.imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });

    let (left, right) = order.split_at_mut(mid);
    build_node(nodes, left, offset, bounds, centroids);
    let right_index = build_node(nodes, right, offset + mid, bounds, centroids);
    nodes[index].offset = right_index as u32;
    nodes[index].count = 0;
    index
}

/// Moller-Trumbore. Returns `(t, u, v)` with `u`, `v` the weights of the
/// second and third corners.
#[inline]
fn intersect_triangle(
    tri: &Triangle,
    origin: &Vec3,
    dir: &Vec3,
    culling: Culling,
) -> Option<(f64, f64, f64)> {
    const DET_EPS: f64 = 1e-14;
    // Slack on the edge tests so rays through shared edges and vertices
    // cannot slip between adjacent triangles.
    const EDGE_EPS: f64 = 1e-12;
    let pvec = dir.cross(&tri.e2);
    let det = tri.e1.dot(&pvec);
    match culling {
        Culling::None if det.abs() < DET_EPS => return None,
        Culling::BackFaces if det < DET_EPS => return None,
        _ => {}
    }
    let inv_det = 1.0 / det;
    let tvec = origin - tri.v0;
    let u = tvec.dot(&pvec) * inv_det;
    if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&tri.e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return None;
    }
    Some((tri.e2.dot(&qvec) * inv_det, u, v))
}
