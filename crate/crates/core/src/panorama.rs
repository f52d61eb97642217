//! Equirectangular radiance maps.
//!
//! Directions map to the sphere with +Z as the pole: the polar angle
//! `theta = acos(z)` runs down the rows and the azimuth `phi = atan2(y, x)`
//! runs across the columns, with `phi = 0` at the horizontal center. Texel
//! `(x, y)` has its center at `(u, v) = (x + 0.5, y + 0.5)`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::geometry::Vec3;
use crate::raster::Rgb;
use crate::{Error, Result};

pub const DEFAULT_WIDTH: usize = 500;
pub const DEFAULT_HEIGHT: usize = 250;

/// Continuous panorama coordinates of a unit direction. `u` is wrapped into
/// `[0, width)`; `v` lies in `[0, height]`.
pub fn dir_to_uv(dir: &Vec3, width: usize, height: usize) -> (f64, f64) {
    let theta = dir.z.clamp(-1.0, 1.0).acos();
    let phi = dir.y.atan2(dir.x);
    let w = width as f64;
    let u = ((phi / TAU + 0.5) * w).rem_euclid(w);
    let v = theta / PI * height as f64;
    (u, v)
}

pub fn uv_to_dir(u: f64, v: f64, width: usize, height: usize) -> Vec3 {
    let phi = (u / width as f64 - 0.5) * TAU;
    let theta = v / height as f64 * PI;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

/// One bilinear interpolation tap: a texel index and its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub index: usize,
    pub weight: f64,
}

/// The four bilinear taps for a direction, with azimuthal wrap and polar
/// clamp. Weights are non-negative and sum to one; near the poles two taps
/// may share a texel.
pub fn bilinear_taps(dir: &Vec3, width: usize, height: usize) -> [Tap; 4] {
    let (u, v) = dir_to_uv(dir, width, height);
    let x = u - 0.5;
    let y = v - 0.5;
    let xf = x.floor();
    let yf = y.floor();
    let fx = x - xf;
    let fy = y - yf;
    let w = width as i64;
    let x0 = (xf as i64).rem_euclid(w) as usize;
    let x1 = (xf as i64 + 1).rem_euclid(w) as usize;
    let max_row = height as i64 - 1;
    let y0 = (yf as i64).clamp(0, max_row) as usize;
    let y1 = (yf as i64 + 1).clamp(0, max_row) as usize;
    [
        Tap {
            index: y0 * width + x0,
            weight: (1.0 - fx) * (1.0 - fy),
        },
        Tap {
            index: y0 * width + x1,
            weight: fx * (1.0 - fy),
        },
        Tap {
            index: y1 * width + x0,
            weight: (1.0 - fx) * fy,
        },
        Tap {
            index: y1 * width + x1,
            weight: fx * fy,
        },
    ]
}

/// Solid angle of any texel in row `y`.
pub fn row_solid_angle(y: usize, width: usize, height: usize) -> f64 {
    let h = height as f64;
    let top = (PI * y as f64 / h).cos();
    let bottom = (PI * (y + 1) as f64 / h).cos();
    TAU / width as f64 * (top - bottom)
}

/// An RGB equirectangular radiance map with `width = 2 * height`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panorama {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl Panorama {
    pub fn constant(width: usize, height: usize, value: Rgb) -> Result<Self> {
        Self::from_data(width, height, vec![value; width * height])
    }

    pub fn black(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, Rgb::zeros())
    }

    pub fn from_data(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        if height == 0 || width != 2 * height {
            return Err(Error::DimensionMismatch(format!(
                "panorama must be 2:1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} texels for a {width}x{height} panorama",
                data.len()
            )));
        }
        if data
            .iter()
            .any(|c| c.iter().any(|v| !(*v >= 0.0) || !v.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "panorama radiance must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Fills every texel from a function of its center direction.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(Vec3) -> Rgb) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(texel_direction(x, y, width, height)));
            }
        }
        Self::from_data(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn texel_count(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[Rgb] {
        &self.data
    }

    /// Raw texel access. Callers must keep values non-negative, e.g. by
    /// calling [`Panorama::clamp_non_negative`] afterwards.
    pub fn data_mut(&mut self) -> &mut [Rgb] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: Rgb) {
        self.data[y * self.width + x] = value.map(|v| v.max(0.0));
    }

    pub fn clamp_non_negative(&mut self) {
        for c in &mut self.data {
            *c = c.map(|v| v.max(0.0));
        }
    }

    pub fn texel_direction(&self, x: usize, y: usize) -> Vec3 {
        texel_direction(x, y, self.width, self.height)
    }

    pub fn taps(&self, dir: &Vec3) -> [Tap; 4] {
        bilinear_taps(dir, self.width, self.height)
    }

    /// Bilinear lookup of the radiance seen along `dir`.
    pub fn lookup(&self, dir: &Vec3) -> Rgb {
        self.taps(dir)
            .iter()
            .fold(Rgb::zeros(), |acc, t| acc + self.data[t.index] * t.weight)
    }

    /// Solid-angle weighted mean radiance over the sphere.
    pub fn mean_radiance(&self) -> Rgb {
        let mut sum = Rgb::zeros();
        for y in 0..self.height {
            let w = row_solid_angle(y, self.width, self.height);
            let row = &self.data[y * self.width..(y + 1) * self.width];
            sum += row.iter().fold(Rgb::zeros(), |a, c| a + c) * w;
        }
        sum / (4.0 * PI)
    }

    /// Rotates about +Z by a whole number of texels (positive: toward larger `u`).
    pub fn rotated_azimuth(&self, shift: isize) -> Self {
        let w = self.width as isize;
        let mut data = vec![Rgb::zeros(); self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let to = (x as isize + shift).rem_euclid(w) as usize;
                data[y * self.width + to] = self.data[y * self.width + x];
            }
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

pub fn texel_direction(x: usize, y: usize, width: usize, height: usize) -> Vec3 {
    uv_to_dir(x as f64 + 0.5, y as f64 + 0.5, width, height)
}

/// GGX normal distribution as a function of the cosine between a sample
/// direction and the lobe center, with `alpha = roughness^2`.
pub fn ggx_kernel(cos: f64, alpha: f64) -> f64 {
    if cos <= 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    let d = cos * cos * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

pub const MIN_ROUGHNESS: f64 = 0.01;
pub const MAX_ROUGHNESS: f64 = 1.0;

/// Convolves `env` with a normalized GGX lobe by brute-force summation over
/// all texels, weighting each by its solid angle.
///
/// Column offsets are summed in a fixed order relative to the output texel,
/// so rotating the input by whole texels about +Z rotates the output
/// bit-exactly.
pub fn prefilter_ggx(env: &Panorama, roughness: f64) -> Result<Panorama> {
    if !(MIN_ROUGHNESS..=MAX_ROUGHNESS).contains(&roughness) {
        return Err(Error::OutOfRange {
            name: "roughness",
            value: roughness,
            min: MIN_ROUGHNESS,
            max: MAX_ROUGHNESS,
        });
    }
    let alpha = roughness * roughness;
    let (w, h) = (env.width, env.height);
    let (sin_theta, cos_theta): (Vec<f64>, Vec<f64>) = (0..h)
        .map(|y| (PI * (y as f64 + 0.5) / h as f64).sin_cos())
        .unzip();
    let solid: Vec<f64> = (0..h).map(|y| row_solid_angle(y, w, h)).collect();
    let cos_dphi: Vec<f64> = (0..w).map(|k| (TAU * k as f64 / w as f64).cos()).collect();

    // Planar channels vectorize far better in the inner loop.
    let planes: [Vec<f64>; 3] = std::array::from_fn(|c| env.data.iter().map(|t| t[c]).collect());

    let mut out = vec![Rgb::zeros(); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(yo, out_row)| {
        let mut acc = [vec![0.0; w], vec![0.0; w], vec![0.0; w]];
        let mut kernel = vec![0.0; w];
        let mut norm = 0.0;
        for yi in 0..h {
            let a = cos_theta[yo] * cos_theta[yi];
            let b = sin_theta[yo] * sin_theta[yi];
            let mut any = false;
            for (k, cd) in kernel.iter_mut().zip(&cos_dphi) {
                *k = ggx_kernel(a + b * cd, alpha) * solid[yi];
                any |= *k > 0.0;
            }
            if !any {
                continue;
            }
            for (c, acc_c) in acc.iter_mut().enumerate() {
                let row = &planes[c][yi * w..(yi + 1) * w];
                for (dx, &k) in kernel.iter().enumerate() {
                    if k == 0.0 {
                        continue;
                    }
                    // Output column x reads input column (x + dx) mod w.
                    let (head, tail) = acc_c.split_at_mut(w - dx);
                    for (o, &e) in head.iter_mut().zip(&row[dx..]) {
                        *o += k * e;
                    }
                    for (o, &e) in tail.iter_mut().zip(&row[..dx]) {
                        *o += k * e;
                    }
                }
            }
            norm += kernel.iter().sum::<f64>();
        }
        for (x, o) in out_row.iter_mut().enumerate() {
            *o = Rgb::new(acc[0][x], acc[1][x], acc[2][x]) / norm;
        }
    });
    Panorama::from_data(w, h, out)
}
