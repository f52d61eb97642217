//! Portable float maps. Files are written little-endian (scale -1.0) with
//! rows stored bottom to top; both endiannesses are accepted on read.

use std::fs;
use std::path::Path;

use crate::panorama::Panorama;
use crate::raster::{Rgb, RgbImage, ScalarImage};
use crate::{Error, Result};

fn encode(
    width: usize,
    height: usize,
    channels: usize,
    texel: impl Fn(usize, usize, usize) -> f64,
) -> Vec<u8> {
    let magic = if channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(width * height * channels * 4);
    for y in (0..height).rev() {
        for x in 0..width {
            for c in 0..channels {
                out.extend_from_slice(&(texel(x, y, c) as f32).to_le_bytes());
            }
        }
    }
    out
}

struct Decoded {
    width: usize,
    height: usize,
    channels: usize,
    /// Top-to-bottom, interleaved.
    values: Vec<f32>,
}

fn decode(path: &Path, bytes: &[u8]) -> Result<Decoded> {
    let bad = |msg: &str| Error::format(path, format!("invalid PFM: {msg}"));
    // Header: three whitespace-separated tokens after the magic, each line
    // terminated by a single whitespace byte.
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        let s = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
        Ok(s)
    };
    let channels = match token()?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(bad("bad magic")),
    };
    let width: usize = token()?.parse().map_err(|_| bad("bad width"))?;
    let height: usize = token()?.parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = token()?.parse().map_err(|_| bad("bad scale"))?;
    if scale == 0.0 {
        return Err(bad("zero scale"));
    }
    pos += 1;
    let count = width * height * channels;
    let payload = bytes
        .get(pos..pos + count * 4)
        .ok_or_else(|| bad("truncated payload"))?;
    let little = scale < 0.0;
    let mut values = vec![0f32; count];
    let row = width * channels;
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, col) = (i / row, i % row);
        values[(height - 1 - file_row) * row + col] = v;
    }
    Ok(Decoded {
        width,
        height,
        channels,
        values,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_decoded(path: &Path) -> Result<Decoded> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes)
}

pub fn write_rgb(path: &Path, image: &RgbImage) -> Result<()> {
    let bytes = encode(image.width(), image.height(), 3, |x, y, c| {
        image.get(x, y)[c]
    });
    write_bytes(path, &bytes)
}

pub fn write_scalar(path: &Path, image: &ScalarImage) -> Result<()> {
    let bytes = encode(image.width(), image.height(), 1, |x, y, _| *image.get(x, y));
    write_bytes(path, &bytes)
}

/// Reads a color or greyscale PFM as RGB (greyscale is replicated).
pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let d = read_decoded(path)?;
    let data = d
        .values
        .chunks_exact(d.channels)
        .map(|c| {
            if d.channels == 3 {
                Rgb::new(c[0] as f64, c[1] as f64, c[2] as f64)
            } else {
                Rgb::repeat(c[0] as f64)
            }
        })
        .collect();
    Ok(RgbImage::from_vec(d.width, d.height, data))
}

pub fn read_scalar(path: &Path) -> Result<ScalarImage> {
    let d = read_decoded(path)?;
    if d.channels != 1 {
        return Err(Error::format(path, "expected a greyscale (Pf) PFM"));
    }
    Ok(ScalarImage::from_vec(
        d.width,
        d.height,
        d.values.iter().map(|&v| v as f64).collect(),
    ))
}

pub fn write_panorama(path: &Path, pano: &Panorama) -> Result<()> {
    let img = RgbImage::from_vec(pano.width(), pano.height(), pano.data().to_vec());
    write_rgb(path, &img)
}

pub fn read_panorama(path: &Path) -> Result<Panorama> {
    let img = read_rgb(path)?;
    Panorama::from_data(img.width(), img.height(), img.into_vec())
        .map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_round_trip_is_exact_for_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pfm");
        let data = (0..12)
            .map(|i| Rgb::new(i as f64 * 0.25, -1.5, (i as f32 * 0.1) as f64))
            .collect();
        let img = RgbImage::from_vec(4, 3, data);
        write_rgb(&path, &img).unwrap();
        assert_eq!(read_rgb(&path).unwrap(), img);
    }

    #[test]
    fn header_is_little_endian_and_bottom_up() {
        let img = ScalarImage::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let bytes = encode(2, 2, 1, |x, y, _| *img.get(x, y));
        assert!(bytes.starts_with(b"Pf\n2 2\n-1.0\n"));
        let payload = &bytes[b"Pf\n2 2\n-1.0\n".len()..];
        assert_eq!(&payload[..4], &3.0f32.to_le_bytes());
    }

    #[test]
    fn reads_big_endian() {
        let mut bytes = b"Pf\n1 2\n1.0\n".to_vec();
        bytes.extend_from_slice(&5.0f32.to_be_bytes());
        bytes.extend_from_slice(&7.0f32.to_be_bytes());
        let d = decode(Path::new("x"), &bytes).unwrap();
        assert_eq!(d.values, vec![7.0, 5.0]);
    }

    #[test]
    fn rejects_truncated() {
        assert!(decode(Path::new("x"), b"PF\n4 4\n-1.0\n\0\0").is_err());
        assert!(decode(Path::new("x"), b"P6\n1 1\n255\n").is_err());
    }
}
