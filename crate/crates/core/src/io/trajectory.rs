//! Camera trajectories, one pose per line:
//! `timestamp tx ty tz qx qy qz qw`, camera-to-world, quaternion scalar last.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub timestamp: f64,
    pub world_from_camera: Isometry3<f64>,
}

pub fn parse(path: &Path, text: &str) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |message: String| Error::MalformedTrajectory {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(malformed(format!(
                "expected 8 fields, found {}",
                fields.len()
            )));
        }
        let mut v = [0f64; 8];
        for (k, f) in fields.iter().enumerate() {
            v[k] = f
                .parse()
                .map_err(|_| malformed(format!("field {} ('{f}') is not a number", k + 1)))?;
            if !v[k].is_finite() {
                return Err(malformed(format!("field {} is not finite", k + 1)));
            }
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        let norm = q.norm();
        if norm < 1e-9 {
            return Err(malformed("zero quaternion".into()));
        }
        // Already-normalized input is kept as is so that writing and reading
        // back reproduces the same bits.
        let rotation = if (norm - 1.0).abs() <= 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        poses.push(Pose {
            timestamp: v[0],
            world_from_camera: Isometry3::from_parts(Translation3::new(v[1], v[2], v[3]), rotation),
        });
    }
    Ok(poses)
}

pub fn read(path: &Path) -> Result<Vec<Pose>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(path, &text)
}

pub fn format(poses: &[Pose]) -> String {
    let mut out = String::new();
    for p in poses {
        let t = &p.world_from_camera.translation.vector;
        let q = p.world_from_camera.rotation.quaternion();
        // `{}` prints the shortest representation that parses back exactly.
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            p.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w
        );
    }
    out
}

pub fn write(path: &Path, poses: &[Pose]) -> Result<()> {
    fs::write(path, format(poses)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn round_trip_is_bit_exact() {
        let poses: Vec<Pose> = (0..20)
            .map(|i| {
                let f = i as f64;
                Pose {
                    timestamp: f * 0.0333,
                    world_from_camera: Isometry3::from_parts(
                        Translation3::new(f.sin() * 3.0, f.cos() / 7.0, 0.1 * f),
                        UnitQuaternion::from_axis_angle(
                            &nalgebra::Unit::new_normalize(Vector3::new(1.0, f, 0.3)),
                            f * 0.37,
                        ),
                    ),
                }
            })
            .collect();
        let back = parse(Path::new("t"), &format(&poses)).unwrap();
        assert_eq!(back, poses);
    }

    #[test]
    fn error_names_the_line() {
        let text = "# header\n0 0 0 0 0 0 0 1\n\n1 0 0 0 0 0 x 1\n";
        match parse(Path::new("t"), text) {
            Err(Error::MalformedTrajectory { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse(Path::new("t"), "0 1 2 3\n") {
            Err(Error::MalformedTrajectory { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quaternion_is_scalar_last() {
        // 90 degrees about +Z.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let poses = parse(Path::new("t"), &format!("0 1 2 3 0 0 {s} {s}")).unwrap();
        let r = poses[0].world_from_camera.rotation * Vector3::x();
        assert!((r - Vector3::y()).norm() < 1e-12);
        assert_eq!(
            poses[0].world_from_camera.translation.vector,
            Vector3::new(1.0, 2.0, 3.0)
        );
    }

    #[test]
    fn unnormalized_quaternion_is_normalized() {
        let poses = parse(Path::new("t"), "0 0 0 0 0 0 0 2").unwrap();
        assert_eq!(
            poses[0].world_from_camera.rotation,
            UnitQuaternion::identity()
        );
    }
}
