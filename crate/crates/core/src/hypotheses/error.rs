use serde::{Deserialize, Serialize};

use crate::binding::{nearest_bodies, PosedHull};
use crate::geometry::transform_point;
use crate::sensor::{project, DepthImage, PointCloud, BACKGROUND};

/// Depth margin for the occlusion test, m.
pub const DEFAULT_OCCLUSION_MARGIN: f64 = 0.02;

/// Per-body fit and occlusion error of one posed model against one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Largest distance from an assigned point to the body, m.
    pub fit: Vec<f64>,
    /// Inscribed radius when the body floats over background, else 0.
    pub occlusion: Vec<f64>,
    /// Points assigned to each body.
    pub points: Vec<usize>,
    pub total: f64,
}

impl ErrorReport {
    pub fn fit_sum(&self) -> f64 {
        self.fit.iter().sum()
    }

    pub fn occlusion_sum(&self) -> f64 {
        self.occlusion.iter().sum()
    }
}

/// True when the body centroid at `c` sees background: off-image, a
/// background pixel, or observed depth more than `margin` behind it.
pub fn occludes_background(image: &DepthImage, c: &crate::geometry::Vec3, margin: f64) -> bool {
    let cam = &image.intrinsics;
    let Some((u, v)) = project(cam, c) else { return true };
    let (u, v) = (u.round(), v.round());
    if u < 0.0 || v < 0.0 || u > (cam.width - 1) as f64 || v > (cam.height - 1) as f64 {
        return true;
    }
    let d = image.get(u as usize, v as usize);
    d == BACKGROUND || d as f64 > c.z + margin
}

/// Partitions the cloud by nearest body (ties to the lower index), takes
/// the worst distance per body as its fit error and adds the occlusion
/// penalty of every body.
pub fn evaluate_error(bodies: &[PosedHull], cloud: &PointCloud, image: &DepthImage, margin: f64) -> ErrorReport {
    let n = bodies.len();
    let mut fit = vec![0.0f64; n];
    let mut points = vec![0usize; n];
    for (b, d) in nearest_bodies(cloud, bodies) {
        fit[b] = fit[b].max(d);
        points[b] += 1;
    }
    let occlusion: Vec<f64> = bodies
        .iter()
        .map(|(h, p)| {
            if occludes_background(image, &transform_point(p, &h.centroid()), margin) {
                h.inscribed_radius()
            } else {
                0.0
            }
        })
        .collect();
    let total = fit.iter().sum::<f64>() + occlusion.iter().sum::<f64>();
    ErrorReport { fit, occlusion, points, total }
}
