use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::panorama::{row_solid_angle, Panorama};
use crate::raster::Rgb;
use crate::Result;

pub const IRRADIANCE_WIDTH: usize = 64;
pub const IRRADIANCE_HEIGHT: usize = 32;

/// Width in radians of the smooth falloff at each light's rim.
const SOFT: f64 = 0.08;
const PEAK: f64 = 0.5;

struct Light {
    azimuth_deg: f64,
    elevation_deg: f64,
    radius_deg: f64,
    color: [f64; 3],
}

const LIGHTS: [Light; 4] = [
    Light {
        azimuth_deg: 40.0,
        elevation_deg: 35.0,
        radius_deg: 17.0,
        color: [1.0, 0.95, 0.85],
    },
    Light {
        azimuth_deg: -100.0,
        elevation_deg: 15.0,
        radius_deg: 21.0,
        color: [0.5, 0.65, 0.85],
    },
    Light {
        azimuth_deg: 160.0,
        elevation_deg: 55.0,
        radius_deg: 14.0,
        color: [0.95, 0.65, 0.35],
    },
    Light {
        azimuth_deg: -30.0,
        elevation_deg: -20.0,
        radius_deg: 17.0,
        color: [0.3, 0.7, 0.4],
    },
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentKind {
    /// Lights on a black background, so every surface point has views whose
    /// reflection misses all lights. The robust diffuse minimum relies on that.
    #[default]
    Studio,
    /// The same lights over a dim sky gradient and a checkered floor, so
    /// every reflection direction carries some signal.
    Room,
}

fn room_background(d: &Vec3) -> Rgb {
    if d.z >= 0.0 {
        Rgb::new(0.06, 0.07, 0.09) + Rgb::new(0.04, 0.06, 0.1) * d.z
    } else {
        let theta = d.z.clamp(-1.0, 1.0).acos();
        let phi = d.y.atan2(d.x);
        let cell = ((phi + PI) / (PI / 6.0)) as i64 + ((theta - PI / 2.0) / (PI / 12.0)) as i64;
        if cell % 2 == 0 {
            Rgb::new(0.12, 0.1, 0.08)
        } else {
            Rgb::new(0.04, 0.035, 0.03)
        }
    }
}

/// A deterministic environment of four colored disk lights with soft rims.
/// Values stay within `[0, PEAK]`.
pub fn procedural_environment(
    kind: EnvironmentKind,
    width: usize,
    height: usize,
) -> Result<Panorama> {
    let lights: Vec<(Vec3, f64, Rgb)> = LIGHTS
        .iter()
        .map(|l| {
            let (az, el) = (l.azimuth_deg.to_radians(), l.elevation_deg.to_radians());
            let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            (dir, l.radius_deg.to_radians(), Rgb::from(l.color))
        })
        .collect();
    Panorama::from_fn(width, height, |d| {
        let base = match kind {
            EnvironmentKind::Studio => Rgb::zeros(),
            EnvironmentKind::Room => room_background(&d),
        };
        lights
            .iter()
            .fold(base, |acc, (dir, radius, color)| {
                let angle = d.dot(dir).clamp(-1.0, 1.0).acos();
                let t = ((radius + SOFT - angle) / SOFT).clamp(0.0, 1.0);
                acc + color * (PEAK * t * t * (3.0 - 2.0 * t))
            })
            .map(|v| v.min(PEAK))
    })
}

/// Cosine-weighted mean of the environment around each normal direction,
/// tabulated on a coarse equirectangular grid and looked up bilinearly.
///
/// The discrete cosine weights are normalized to sum to one, so a constant
/// environment yields exactly that constant.
#[derive(Debug, Clone)]
pub struct IrradianceMap {
    grid: Panorama,
}

impl IrradianceMap {
    pub fn new(env: &Panorama) -> Result<Self> {
        let (w, h) = (env.width(), env.height());
        let dirs: Vec<(Vec3, f64)> = (0..h)
            .flat_map(|y| {
                let solid = row_solid_angle(y, w, h);
                (0..w).map(move |x| (crate::panorama::texel_direction(x, y, w, h), solid))
            })
            .collect();
        let data: Vec<Rgb> = (0..IRRADIANCE_WIDTH * IRRADIANCE_HEIGHT)
            .into_par_iter()
            .map(|i| {
                let n = crate::panorama::texel_direction(
                    i % IRRADIANCE_WIDTH,
                    i / IRRADIANCE_WIDTH,
                    IRRADIANCE_WIDTH,
                    IRRADIANCE_HEIGHT,
                );
                let mut sum = Rgb::zeros();
                let mut norm = 0.0;
                for ((dir, solid), radiance) in dirs.iter().zip(env.data()) {
                    let c = n.dot(dir);
                    if c > 0.0 {
                        sum += radiance * (c * solid);
                        norm += c * solid;
                    }
                }
                sum / norm
            })
            .collect();
        Ok(Self {
            grid: Panorama::from_data(IRRADIANCE_WIDTH, IRRADIANCE_HEIGHT, data)?,
        })
    }

    pub fn lookup(&self, normal: &Vec3) -> Rgb {
        self.grid.lookup(normal)
    }

    pub fn grid(&self) -> &Panorama {
        &self.grid
    }
}
