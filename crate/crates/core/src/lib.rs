//! Recovery of specular reflectance maps (environment radiance filtered by a
//! surface's specular lobe) and a renderable surface light field from a mesh,
//! calibrated cameras and registered color frames.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod components;
pub mod diffuse;
pub mod frame;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod panorama;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
