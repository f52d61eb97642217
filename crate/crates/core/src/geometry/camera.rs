use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{Point, Ray, Vec3};
use crate::{Error, Result};

/// Pinhole intrinsics in pixels. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Square pixels, principal point at the image center.
    pub fn from_fov(width: usize, height: usize, fov_y_degrees: f64) -> Self {
        let f = 0.5 * height as f64 / (0.5 * fov_y_degrees.to_radians()).tan();
        Self {
            fx: f,
            fy: f,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
        }
    }

    /// 640x480 with a 60 degree vertical field of view.
    pub fn vga() -> Self {
        Self::from_fov(640, 480, 60.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidCamera(
                "focal lengths must be positive".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("empty image".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::InvalidCamera(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Calibrated pinhole camera. Camera axes follow the computer-vision
/// convention: +X right, +Y down, +Z forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    intrinsics: Intrinsics,
    world_from_camera: Isometry3<f64>,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, world_from_camera: Isometry3<f64>) -> Result<Self> {
        intrinsics.validate()?;
        Ok(Self {
            intrinsics,
            world_from_camera,
        })
    }

    /// Builds a camera from an explicit rotation matrix, which must be
    /// orthonormal with determinant +1 (tolerance 1e-6).
    pub fn from_rotation_matrix(
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        translation: Vec3,
    ) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if ortho > 1e-6 || (det - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidCamera(format!(
                "rotation is not a proper rotation (orthogonality error {ortho:e}, det {det})"
            )));
        }
        let rotation =
            UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rotation));
        Self::new(
            intrinsics,
            Isometry3::from_parts(Translation3::from(translation), rotation),
        )
    }

    /// Camera at `eye` looking at `target`, with `up` projected to image-up.
    pub fn look_at(intrinsics: Intrinsics, eye: Point, target: Point, up: Vec3) -> Result<Self> {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::InvalidCamera(
                "up vector is parallel to the view direction".into(),
            ));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self::from_rotation_matrix(intrinsics, rotation, eye.coords)
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn world_from_camera(&self) -> &Isometry3<f64> {
        &self.world_from_camera
    }

    pub fn center(&self) -> Point {
        Point::from(self.world_from_camera.translation.vector)
    }

    /// Unit optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.world_from_camera.rotation * Vec3::z()
    }

    /// Pinhole projection to continuous pixel coordinates. `None` behind the
    /// camera or outside the image rectangle.
    pub fn project(&self, world: &Point) -> Option<(f64, f64)> {
        let p = self.world_from_camera.inverse_transform_point(world);
        if p.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        let u = k.fx * p.x / p.z + k.cx;
        let v = k.fy * p.y / p.z + k.cy;
        if (0.0..k.width as f64).contains(&u) && (0.0..k.height as f64).contains(&v) {
            Some((u, v))
        } else {
            None
        }
    }

    /// World point at camera-space depth `depth` along pixel coordinate `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Point {
        let k = &self.intrinsics;
        let p = Point::new((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
        self.world_from_camera.transform_point(&p)
    }

    /// Ray from the camera center through continuous pixel coordinate `(u, v)`.
    pub fn ray_through(&self, u: f64, v: f64) -> Ray {
        let k = &self.intrinsics;
        let dir_cam = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        Ray::new(self.center(), self.world_from_camera.rotation * dir_cam)
    }

    /// Ray through the center of pixel `(x, y)`.
    #[inline]
    pub fn pixel_ray(&self, x: usize, y: usize) -> Ray {
        self.ray_through(x as f64 + 0.5, y as f64 + 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> Camera {
        Camera::look_at(
            Intrinsics::from_fov(64, 48, 50.0),
            Point::new(0.0, -3.0, 0.5),
            Point::origin(),
            Vec3::z(),
        )
        .unwrap()
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let cam = camera();
        let p = cam.center() + cam.forward();
        let (u, v) = cam.project(&p).unwrap();
        assert!((u - 32.0).abs() < 1e-9 && (v - 24.0).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_is_none() {
        let cam = camera();
        assert!(cam.project(&(cam.center() - cam.forward())).is_none());
    }

    #[test]
    fn unproject_project_round_trip() {
        let cam = camera();
        for &(u, v, d) in &[(0.3, 0.2, 1.0), (63.7, 47.9, 4.2), (10.0, 30.0, 0.1)] {
            let (pu, pv) = cam.project(&cam.unproject(u, v, d)).unwrap();
            assert!((pu - u).abs() < 1e-4 && (pv - v).abs() < 1e-4);
        }
    }

    #[test]
    fn image_up_matches_world_up() {
        let cam = camera();
        let (_, v_top) = cam.project(&Point::new(0.0, 0.0, 0.5)).unwrap();
        let (_, v_low) = cam.project(&Point::new(0.0, 0.0, 0.0)).unwrap();
        assert!(v_top < v_low);
    }

    #[test]
    fn rejects_improper_rotation() {
        let k = Intrinsics::vga();
        let flip = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Camera::from_rotation_matrix(k, flip, Vec3::zeros()).is_err());
        let skew = Matrix3::new(1.0, 0.01, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Camera::from_rotation_matrix(k, skew, Vec3::zeros()).is_err());
    }

    #[test]
    fn rejects_bad_intrinsics() {
        let mut k = Intrinsics::vga();
        k.fx = 0.0;
        assert!(k.validate().is_err());
        let mut k = Intrinsics::vga();
        k.cx = 640.0;
        assert!(k.validate().is_err());
    }
}
