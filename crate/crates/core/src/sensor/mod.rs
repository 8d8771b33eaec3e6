//! Depth images, point clouds, the synthetic camera and the scanline
//! fingertip detector.

mod cloud;
mod detector;
mod io;
mod noise;
mod render;

pub use cloud::{boundary_planes, voxel_subsample, BoundaryPlaneSet, Plane};
pub use detector::{five_finger_detector, DetectorConfig};
pub use io::{read_depth_sequence, DepthSequenceReader, DepthSequenceWriter, GroundTruth, GroundTruthFrame, SensorIoError};
pub use noise::{apply_noise, NoiseConfig};
pub use render::{project, render_depth, render_depth_into};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

/// Depth value meaning "no return".
pub const BACKGROUND: f32 = 0.0;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid camera: {0}")]
pub struct CameraError(pub String);

/// Pinhole camera looking down +z with y pointing down the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self { width: 320, height: 240, fx: 300.0, fy: 300.0, cx: 159.5, cy: 119.5, near: 0.2, far: 2.0 }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), CameraError> {
        if self.width == 0 || self.height == 0 {
            return Err(CameraError("image must be at least 1x1".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(CameraError("focal lengths must be positive".into()));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(CameraError("principal point must be finite".into()));
        }
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err(CameraError("need 0 < near < far".into()));
        }
        Ok(())
    }

    /// Camera-frame point for pixel (u, v) at depth `d`.
    #[inline]
    pub fn deproject_pixel(&self, u: f64, v: f64, d: f64) -> Vec3 {
        Vec3::new((u - self.cx) * d / self.fx, (v - self.cy) * d / self.fy, d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub intrinsics: CameraIntrinsics,
    /// Row-major, meters, [`BACKGROUND`] for no return.
    pub depth: Vec<f32>,
}

impl DepthImage {
    pub fn blank(intrinsics: CameraIntrinsics) -> Self {
        Self { intrinsics, depth: vec![BACKGROUND; intrinsics.width * intrinsics.height] }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.depth[v * self.intrinsics.width + u]
    }

    #[inline]
    pub fn is_foreground(&self, u: usize, v: usize) -> bool {
        self.get(u, v) != BACKGROUND
    }

    pub fn foreground_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d != BACKGROUND).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One point per foreground pixel, in row-major pixel order.
pub fn deproject(image: &DepthImage) -> PointCloud {
    let cam = &image.intrinsics;
    let mut points = Vec::with_capacity(image.foreground_count());
    for v in 0..cam.height {
        for u in 0..cam.width {
            let d = image.get(u, v);
            if d != BACKGROUND {
                points.push(cam.deproject_pixel(u as f64, v as f64, d as f64));
            }
        }
    }
    PointCloud { points }
}
