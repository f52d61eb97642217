//! 8-bit PNG with a plain 2.2 gamma curve.

use std::path::Path;

use image::{ImageBuffer, Rgb as PngRgb};

use crate::raster::{Rgb, RgbImage};
use crate::{Error, Result};

pub const GAMMA: f64 = 2.2;

/// Linear value to 8-bit code after scaling by `2^exposure`.
pub fn encode_value(linear: f64, exposure: f64) -> u8 {
    let v = (linear * exposure.exp2()).clamp(0.0, 1.0).powf(1.0 / GAMMA);
    (v * 255.0).round() as u8
}

pub fn decode_value(code: u8) -> f64 {
    (code as f64 / 255.0).powf(GAMMA)
}

pub fn encode(image: &RgbImage, exposure: f64) -> ImageBuffer<PngRgb<u8>, Vec<u8>> {
    ImageBuffer::from_fn(image.width() as u32, image.height() as u32, |x, y| {
        let c = image.get(x as usize, y as usize);
        PngRgb([
            encode_value(c.x, exposure),
            encode_value(c.y, exposure),
            encode_value(c.z, exposure),
        ])
    })
}

pub fn write(path: &Path, image: &RgbImage, exposure: f64) -> Result<()> {
    encode(image, exposure)
        .save(path)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Reads an 8-bit image and linearizes it.
pub fn read_linear(path: &Path) -> Result<RgbImage> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path)
        .map_err(|e| Error::format(path, e.to_string()))?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| Rgb::new(decode_value(p[0]), decode_value(p[1]), decode_value(p[2])))
        .collect();
    Ok(RgbImage::from_vec(w, h, data))
}
