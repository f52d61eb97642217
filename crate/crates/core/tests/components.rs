mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_panorama, random_sphere, ring_cameras};
use speclight::components::{
    composite, cross_project, fresnel_coefficient, render_components, softmax, CompositeMode,
    RenderComponents,
};
use speclight::geometry::{Camera, Intrinsics, Point, Scene, TriangleMesh, Vec3};
use speclight::panorama::Panorama;
use speclight::raster::Rgb;
use speclight::synth::shapes::{concave_bowl, two_spheres};
use speclight::Error;

fn with_albedo_and_logits(mut mesh: TriangleMesh, m: usize) -> TriangleMesh {
    let n = mesh.vertex_count();
    let albedo = (0..n)
        .map(|i| Rgb::new(0.2 + 0.5 * ((i % 5) as f64 / 5.0), 0.4, 0.3))
        .collect();
    mesh.set_albedo(albedo).unwrap();
    mesh.set_logits(
        m,
        (0..n * m).map(|i| ((i * 37) % 11) as f64 / 11.0).collect(),
    )
    .unwrap();
    mesh
}

fn assert_occlusion_structure(c: &RenderComponents) {
    let cov = c.coverage.as_slice();
    let vis = c.visibility.as_slice();
    for p in 0..cov.len() {
        if !cov[p] {
            assert!(!vis[p]);
            assert_eq!(c.first_bounce.as_slice()[p], Rgb::zeros());
            assert_eq!(c.specular.as_slice()[p], Rgb::zeros());
            assert_eq!(c.diffuse.as_slice()[p], Rgb::zeros());
            continue;
        }
        if vis[p] {
            assert_eq!(c.first_bounce.as_slice()[p], Rgb::zeros(), "pixel {p}");
        } else {
            assert_eq!(c.specular.as_slice()[p], Rgb::zeros(), "pixel {p}");
        }
    }
}

proptest! {
    #[test]
    fn softmax_lies_on_the_simplex(z in prop::collection::vec(-50.0f64..50.0, 1..6), shift in -100.0f64..100.0) {
        let mut w = vec![0.0; z.len()];
        softmax(&z, &mut w);
        prop_assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-15 * z.len() as f64);
        let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
        let mut w2 = vec![0.0; z.len()];
        softmax(&shifted, &mut w2);
        for (a, b) in w.iter().zip(&w2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn softmax_handles_extreme_logits() {
    let mut w = [0.0; 3];
    softmax(&[1000.0, -1000.0, 1000.0], &mut w);
    assert_eq!(w, [0.5, 0.0, 0.5]);
}

#[test]
fn fresnel_reference_values() {
    assert_eq!(fresnel_coefficient(1.0), 0.0);
    assert_eq!(fresnel_coefficient(0.0), 1.0);
    assert_eq!(fresnel_coefficient(0.5), 0.03125);
    assert!((fresnel_coefficient(60f64.to_radians().cos()) - 0.03125).abs() < 1e-15);
    assert_eq!(fresnel_coefficient(-0.3), 1.0);
    assert_eq!(fresnel_coefficient(1.5), 0.0);
}

#[test]
fn convex_sphere_is_never_occluded() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let scene = Scene::new(random_sphere(&mut rng, 3, 2));
    let srms: Vec<Panorama> = (0..2)
        .map(|_| random_panorama(&mut rng, 40, 20, 0.0, 1.0))
        .collect();
    for camera in ring_cameras(8, 64, 48, 3.0, 35.0, Point::origin()) {
        let c = render_components(&scene, &srms, &camera).unwrap();
        assert!(c.covered_count() > 500);
        assert_eq!(c.visibility, c.coverage);
        assert!(c.first_bounce.as_slice().iter().all(|v| *v == Rgb::zeros()));
    }
}

#[test]
fn occluders_block_reflections_and_supply_first_bounce() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let srm = random_panorama(&mut rng, 40, 20, 0.1, 1.0);
    let scenes = [
        Scene::new(with_albedo_and_logits(two_spheres(3).mesh, 1)),
        Scene::new(with_albedo_and_logits(concave_bowl(2), 1)),
    ];
    for scene in &scenes {
        let mut blocked = 0;
        for camera in ring_cameras(6, 64, 48, 4.0, 30.0, scene.mesh().centroid()) {
            let c = render_components(scene, std::slice::from_ref(&srm), &camera).unwrap();
            assert_occlusion_structure(&c);
            for p in 0..c.coverage.len() {
                if c.coverage.as_slice()[p] && !c.visibility.as_slice()[p] {
                    blocked += 1;
                    assert!(c.first_bounce.as_slice()[p].max() > 0.0);
                }
            }
        }
        assert!(blocked > 50, "only {blocked} occluded pixels");
    }
}

#[test]
fn mirror_sphere_shows_the_highlight_behind_the_camera() {
    let mut mesh = random_sphere(&mut ChaCha8Rng::seed_from_u64(2), 4, 1);
    mesh.set_logits(1, vec![0.0; mesh.vertex_count()]).unwrap();
    let scene = Scene::new(mesh);
    let srm = Panorama::from_fn(200, 100, |d| {
        if d.x > 0.95 {
            Rgb::repeat(1.0)
        } else {
            Rgb::zeros()
        }
    })
    .unwrap();
    let camera = Camera::look_at(
        Intrinsics::from_fov(65, 65, 40.0),
        Point::new(4.0, 0.0, 0.0),
        Point::origin(),
        Vec3::z(),
    )
    .unwrap();
    let c = render_components(&scene, std::slice::from_ref(&srm), &camera).unwrap();
    let center = c.coverage.index(32, 32);
    assert!(c.specular.as_slice()[center].min() > 0.99);
    assert!(c.fresnel.as_slice()[center] < 1e-6);
    let r = c.reflection.as_slice()[center];
    assert!(r.x > 0.999, "{r:?}");
    // Away from the center the mirror image goes dark.
    let edge = c.coverage.index(32, 10);
    assert!(c.coverage.as_slice()[edge]);
    assert_eq!(c.specular.as_slice()[edge], Rgb::zeros());
    // The specular image is the SRM looked up along the reflection image.
    for p in 0..c.coverage.len() {
        if c.visibility.as_slice()[p] {
            let expected = srm.lookup(&c.reflection.as_slice()[p]);
            assert!((c.specular.as_slice()[p] - expected).norm() < 1e-12);
        }
    }
}

#[test]
fn reflection_obeys_the_mirror_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scene = Scene::new(random_sphere(&mut rng, 3, 1));
    let srm = random_panorama(&mut rng, 20, 10, 0.0, 1.0);
    let camera = ring_cameras(1, 48, 36, 3.0, 10.0, Point::origin())[0];
    let c = render_components(&scene, &[srm], &camera).unwrap();
    for p in 0..c.coverage.len() {
        if !c.coverage.as_slice()[p] {
            continue;
        }
        let (d, n, r) = (
            c.view_dir.as_slice()[p],
            c.normal.as_slice()[p],
            c.reflection.as_slice()[p],
        );
        assert!((r.norm() - 1.0).abs() < 1e-12);
        assert!((r.dot(&n) + d.dot(&n)).abs() < 1e-12);
        assert!((r - d).cross(&n).norm() < 1e-12);
        let cos = -d.dot(&n);
        assert!((c.fresnel.as_slice()[p] - (1.0 - cos).powi(5)).abs() < 1e-15);
    }
}

#[test]
fn composite_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let scene = Scene::new(random_sphere(&mut rng, 3, 2));
    let srms: Vec<Panorama> = (0..2)
        .map(|_| random_panorama(&mut rng, 20, 10, 0.0, 1.5))
        .collect();
    let camera = ring_cameras(1, 48, 36, 3.0, 10.0, Point::origin())[0];
    let c = render_components(&scene, &srms, &camera).unwrap();
    let plain = composite(&c, CompositeMode::Plain, 0.04).unwrap();
    let unit = composite(&c, CompositeMode::Fresnel, 1.0).unwrap();
    assert_eq!(plain, unit);
    let fresnel = composite(&c, CompositeMode::Fresnel, 0.04).unwrap();
    let mut clamped = 0;
    for p in 0..c.coverage.len() {
        let (d, s, f) = (
            c.diffuse.as_slice()[p],
            c.specular.as_slice()[p],
            c.fresnel.as_slice()[p],
        );
        let sum = d + s;
        if sum.max() > 1.0 {
            clamped += 1;
        }
        assert_eq!(plain.as_slice()[p], sum.map(|v| v.clamp(0.0, 1.0)));
        let expected = (d + s * (0.04 + 0.96 * f)).map(|v| v.clamp(0.0, 1.0));
        assert!((fresnel.as_slice()[p] - expected).norm() < 1e-15);
        if f == 0.0 {
            assert_eq!(
                fresnel.as_slice()[p],
                (d + s * 0.04).map(|v| v.clamp(0.0, 1.0))
            );
        }
    }
    assert!(clamped > 0, "clamping never exercised");
    for r0 in [-0.1, 1.1, f64::NAN] {
        assert!(matches!(
            composite(&c, CompositeMode::Fresnel, r0),
            Err(Error::OutOfRange { .. })
        ));
    }
}

#[test]
fn cross_projected_weights_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scene = Scene::new(random_sphere(&mut rng, 3, 3));
    let srms: Vec<Panorama> = (0..3)
        .map(|_| random_panorama(&mut rng, 20, 10, 0.0, 1.0))
        .collect();
    let cams = ring_cameras(12, 80, 60, 3.0, 15.0, Point::origin());
    let a = render_components(&scene, &srms, &cams[0]).unwrap();
    for cam_b in &cams[1..3] {
        let b = render_components(&scene, &srms, cam_b).unwrap();
        let report = cross_project(&a, &cams[0], &b, cam_b, &scene).unwrap();
        assert!(report.compared > 500, "{report:?}");
        assert!(report.mean_weight_diff <= 1e-6, "{report:?}");
        assert!(report.mean_diffuse_diff <= 1e-6, "{report:?}");
    }
    // Opposite views share no surface points.
    let b = render_components(&scene, &srms, &cams[6]).unwrap();
    let report = cross_project(&a, &cams[0], &b, &cams[6], &scene).unwrap();
    assert!(report.compared < 20, "{report:?}");
}

#[test]
fn rendering_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let scene = Scene::new(with_albedo_and_logits(two_spheres(2).mesh, 2));
    let srms: Vec<Panorama> = (0..2)
        .map(|_| random_panorama(&mut rng, 20, 10, 0.0, 1.0))
        .collect();
    let camera = ring_cameras(3, 48, 36, 4.0, 20.0, Point::origin())[1];
    let a = render_components(&scene, &srms, &camera).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(2)
        .build()
        .unwrap()
        .install(|| render_components(&scene, &srms, &camera).unwrap());
    assert_eq!(a, b);
}

#[test]
fn srm_count_must_match_logits() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let scene = Scene::new(random_sphere(&mut rng, 1, 2));
    let srm = random_panorama(&mut rng, 20, 10, 0.0, 1.0);
    let camera = ring_cameras(1, 16, 12, 3.0, 10.0, Point::origin())[0];
    assert!(matches!(
        render_components(&scene, &[srm], &camera),
        Err(Error::DimensionMismatch(_))
    ));
}
