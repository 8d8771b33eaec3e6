use std::collections::BTreeMap;

use super::PointCloud;
use crate::geometry::Vec3;

/// Replaces the points of every occupied voxel (grid anchored at the
/// origin) with their mean. Output is sorted by voxel index.
pub fn voxel_subsample(cloud: &PointCloud, voxel_size: f64) -> PointCloud {
    assert!(voxel_size > 0.0, "voxel size must be positive");
    let inv = 1.0 / voxel_size;
    let mut cells: BTreeMap<(i64, i64, i64), (Vec3, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let key = ((p.x * inv).floor() as i64, (p.y * inv).floor() as i64, (p.z * inv).floor() as i64);
        let e = cells.entry(key).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    let points = cells.into_values().map(|(sum, n)| sum / n as f64).collect();
    PointCloud { points }
}

/// Plane `normal . x >= offset`, interior side positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    #[inline]
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryPlaneSet {
    pub planes: Vec<Plane>,
}

/// Silhouette frustum of a cloud: one plane through the camera origin per
/// edge of the 2D hull of the normalized image projections, plus a near
/// plane `near_margin` in front of the closest point. Empty for fewer than
/// three points or a degenerate silhouette.
pub fn boundary_planes(cloud: &PointCloud, near_margin: f64) -> BoundaryPlaneSet {
    if cloud.len() < 3 {
        return BoundaryPlaneSet::default();
    }
    let proj: Vec<[f64; 2]> = cloud.points.iter().map(|p| [p.x / p.z, p.y / p.z]).collect();
    let hull = hull_2d(&proj);
    if hull.len() < 3 {
        return BoundaryPlaneSet::default();
    }
    let mut planes = Vec::with_capacity(hull.len() + 1);
    for k in 0..hull.len() {
        let a = proj[hull[k]];
        let b = proj[hull[(k + 1) % hull.len()]];
        let ra = Vec3::new(a[0], a[1], 1.0);
        let rb = Vec3::new(b[0], b[1], 1.0);
        // Counter-clockwise hull in (x, y): the interior is to the left of
        // a -> b, which is the side `ra x rb` points to.
        let n = ra.cross(&rb);
        let len = n.norm();
        if len <= 1e-15 {
            continue;
        }
        planes.push(Plane { normal: n / len, offset: 0.0 });
    }
    // Every source point must satisfy every side plane; rounding in the
    // hull can leave a point a hair outside, so absorb the worst residual.
    for pl in &mut planes {
        let worst = cloud.points.iter().map(|p| pl.signed_distance(p)).fold(f64::INFINITY, f64::min);
        if worst < 0.0 {
            pl.offset = worst;
        }
    }
    let zmin = cloud.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    planes.push(Plane { normal: Vec3::z(), offset: zmin - near_margin });
    BoundaryPlaneSet { planes }
}

/// Andrew's monotone chain; counter-clockwise in a y-up sense, collinear
/// points dropped. Returns indices into `pts`.
fn hull_2d(pts: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| pts[a].partial_cmp(&pts[b]).expect("finite projections"));
    idx.dedup_by(|a, b| pts[*a] == pts[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let cross = |o: usize, a: usize, b: usize| {
        (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1]) - (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0])
    };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= 0.0 {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= 0.0 {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
