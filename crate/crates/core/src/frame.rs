use crate::geometry::Camera;
use crate::raster::RgbImage;

/// An observed linear-radiance image with the camera that captured it.
#[derive(Debug, Clone)]
pub struct Frame {
    pub id: usize,
    pub camera: Camera,
    pub image: RgbImage,
}
