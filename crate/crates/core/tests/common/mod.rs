#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speclight::frame::Frame;
use speclight::geometry::{Camera, Culling, Intrinsics, Point, Ray, Scene, TriangleMesh, Vec3};
use speclight::optimizer::{loss_and_gradients, OptimizerConfig, OptimizerState, Problem};
use speclight::panorama::Panorama;
use speclight::raster::{Rgb, RgbImage};
use speclight::synth::shapes::icosphere;

/// Cameras on a horizontal ring around `target`, looking at it.
pub fn ring_cameras(
    count: usize,
    width: usize,
    height: usize,
    radius: f64,
    elevation_deg: f64,
    target: Point,
) -> Vec<Camera> {
    let intr = Intrinsics::from_fov(width, height, 45.0);
    let el = elevation_deg.to_radians();
    (0..count)
        .map(|i| {
            let az = std::f64::consts::TAU * i as f64 / count as f64;
            let eye =
                target + Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * radius;
            Camera::look_at(intr, eye, target, Vec3::z()).unwrap()
        })
        .collect()
}

pub fn random_panorama(
    rng: &mut ChaCha8Rng,
    width: usize,
    height: usize,
    lo: f64,
    hi: f64,
) -> Panorama {
    let data = (0..width * height)
        .map(|_| {
            Rgb::new(
                rng.random_range(lo..hi),
                rng.random_range(lo..hi),
                rng.random_range(lo..hi),
            )
        })
        .collect();
    Panorama::from_data(width, height, data).unwrap()
}

/// Sphere with random diffuse albedo and random logits for `m` materials.
pub fn random_sphere(rng: &mut ChaCha8Rng, subdivisions: u32, m: usize) -> TriangleMesh {
    let mut mesh = icosphere(subdivisions, 1.0, Point::origin());
    let n = mesh.vertex_count();
    let albedo = (0..n)
        .map(|_| {
            Rgb::new(
                rng.random_range(0.1..0.5),
                rng.random_range(0.1..0.5),
                rng.random_range(0.1..0.5),
            )
        })
        .collect();
    mesh.set_albedo(albedo).unwrap();
    let logits = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    mesh.set_logits(m, logits).unwrap();
    mesh
}

/// The toy problem used for gradient checks: a 10x5 panorama, two bases and
/// four 10x10 frames of a sphere, about 200 covered pixels in total. Targets
/// are random, so residuals are generic.
pub struct Toy {
    pub problem: Problem,
    pub state: OptimizerState,
    pub config: OptimizerConfig,
    pub covered: usize,
}

pub fn toy_problem(seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h, m) = (10, 5, 2);
    let mesh = random_sphere(&mut rng, 1, m);
    let vertex_count = mesh.vertex_count();
    let scene = Scene::new(mesh);
    let frames: Vec<Frame> = ring_cameras(4, 10, 10, 3.2, 25.0, Point::origin())
        .into_iter()
        .enumerate()
        .map(|(id, camera)| {
            let image = RgbImage::from_vec(
                10,
                10,
                (0..100)
                    .map(|_| {
                        Rgb::new(
                            rng.random_range(0.0..0.8),
                            rng.random_range(0.0..0.8),
                            rng.random_range(0.0..0.8),
                        )
                    })
                    .collect(),
            );
            Frame { id, camera, image }
        })
        .collect();
    let problem = Problem::new(&scene, &frames, w, h).unwrap();
    let covered = problem.frames.iter().map(|f| f.covered()).sum();
    let srms: Vec<Panorama> = (0..m)
        .map(|_| random_panorama(&mut rng, w, h, 0.05, 0.6))
        .collect();
    let logits = (0..vertex_count * m)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let state = OptimizerState::from_parameters(&srms, logits).unwrap();
    let config = OptimizerConfig {
        material_count: m,
        srm_width: w,
        srm_height: h,
        lambda_sparsity: 1e-2,
        lambda_smooth: 1e-1,
        ..Default::default()
    };
    Toy {
        problem,
        state,
        config,
        covered,
    }
}

#[derive(Debug, Default)]
pub struct GradientCheck {
    pub checked: usize,
    /// Parameters whose finite differences at two step sizes disagree, i.e.
    /// a kink of some absolute value lies within the step.
    pub skipped: usize,
    pub max_relative_error: f64,
}

fn total_loss(state: &OptimizerState, toy: &Toy, batch: &[usize]) -> f64 {
    loss_and_gradients(state, &toy.problem, batch, &toy.config)
        .unwrap()
        .0
        .total()
}

/// Compares every analytic partial derivative against a central difference
/// with step `eps`. A second difference at `eps / 2` flags kink-adjacent
/// parameters, which are skipped.
pub fn gradient_check(toy: &Toy, eps: f64) -> GradientCheck {
    let batch: Vec<usize> = (0..toy.problem.frames.len()).collect();
    let (_, grad) = loss_and_gradients(&toy.state, &toy.problem, &batch, &toy.config).unwrap();
    let mut out = GradientCheck::default();
    let mut probe = |analytic: f64, set: &dyn Fn(&mut OptimizerState, f64)| {
        let fd = |step: f64| {
            let mut plus = toy.state.clone();
            set(&mut plus, step);
            let mut minus = toy.state.clone();
            set(&mut minus, -step);
            (total_loss(&plus, toy, &batch) - total_loss(&minus, toy, &batch)) / (2.0 * step)
        };
        let (coarse, fine) = (fd(eps), fd(eps / 2.0));
        let scale = coarse.abs().max(fine.abs()).max(1e-9);
        if (coarse - fine).abs() > 1e-6 * scale {
            out.skipped += 1;
            return;
        }
        let denom = analytic.abs().max(coarse.abs());
        let rel = if denom < 1e-12 {
            0.0
        } else {
            (analytic - coarse).abs() / denom
        };
        out.checked += 1;
        out.max_relative_error = out.max_relative_error.max(rel);
    };
    for (i, &g) in grad.srm.iter().enumerate() {
        probe(g, &|s: &mut OptimizerState, d: f64| {
            s.srm_values_mut()[i] += d
        });
    }
    for (i, &g) in grad.logits.iter().enumerate() {
        probe(g, &|s: &mut OptimizerState, d: f64| s.logits_mut()[i] += d);
    }
    out
}

/// Nearest hit by plane intersection and edge-function inside tests over
/// every face. Also returns the smallest edge margin of that hit so callers
/// can skip rays that graze an edge. Hits up to 1e-9 outside an edge count,
/// so rays aimed exactly at a vertex are not lost to rounding.
pub fn brute_force(mesh: &TriangleMesh, ray: &Ray, culling: Culling) -> Option<(f64, usize, f64)> {
    let p = mesh.positions();
    let mut best: Option<(f64, usize, f64)> = None;
    for (face, f) in mesh.faces().iter().enumerate() {
        let [a, b, c] = f.map(|i| p[i as usize]);
        let n = (b - a).cross(&(c - a));
        let denom = ray.dir.dot(&n);
        if denom == 0.0 || (culling == Culling::BackFaces && denom > 0.0) {
            continue;
        }
        let t = (a - ray.origin).dot(&n) / denom;
        if t <= 0.0 {
            continue;
        }
        let x = ray.at(t);
        let area = n.norm_squared();
        let e = [
            (c - b).cross(&(x - b)).dot(&n) / area,
            (a - c).cross(&(x - c)).dot(&n) / area,
            (b - a).cross(&(x - a)).dot(&n) / area,
        ];
        let margin = e.iter().copied().fold(f64::INFINITY, f64::min);
        if margin < -1e-9 {
            continue;
        }
        if best.is_none_or(|(bt, _, _)| t < bt) {
            best = Some((t, face, margin));
        }
    }
    best
}
