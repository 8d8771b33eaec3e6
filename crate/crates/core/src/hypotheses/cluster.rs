use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::sensor::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandCluster {
    pub hand: Handedness,
    pub cloud: PointCloud,
}

pub const KMEANS_ITERATIONS: usize = 20;

/// Two-means split of the cloud seeded from its x extremes. Centroids
/// closer than `merge_distance` collapse to a single right-hand cluster;
/// otherwise the cluster with the smaller mean x is the left hand.
pub fn cluster_hands(cloud: &PointCloud, merge_distance: f64) -> Vec<HandCluster> {
    let pts = &cloud.points;
    if pts.is_empty() {
        return Vec::new();
    }
    let lo = pts.iter().enumerate().min_by(|a, b| a.1.x.total_cmp(&b.1.x).then(a.0.cmp(&b.0))).unwrap().0;
    let hi = pts.iter().enumerate().max_by(|a, b| a.1.x.total_cmp(&b.1.x).then(b.0.cmp(&a.0))).unwrap().0;
    let mut centers = [pts[lo], pts[hi]];
    let mut label = vec![usize::MAX; pts.len()];
    for _ in 0..KMEANS_ITERATIONS {
        let mut changed = false;
        for (l, p) in label.iter_mut().zip(pts) {
            let k = usize::from((p - centers[1]).norm_squared() < (p - centers[0]).norm_squared());
            changed |= *l != k;
            *l = k;
        }
        let mut sum = [Vec3::zeros(); 2];
        let mut n = [0usize; 2];
        for (&l, p) in label.iter().zip(pts) {
            sum[l] += p;
            n[l] += 1;
        }
        for k in 0..2 {
            if n[k] > 0 {
                centers[k] = sum[k] / n[k] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let split = |k: usize| PointCloud::new(pts.iter().zip(&label).filter(|(_, &l)| l == k).map(|(p, _)| *p).collect());
    let (a, b) = (split(0), split(1));
    if a.is_empty() || b.is_empty() || (centers[0] - centers[1]).norm() < merge_distance {
        return vec![HandCluster { hand: Handedness::Right, cloud: cloud.clone() }];
    }
    let (left, right) = if centers[0].x <= centers[1].x { (a, b) } else { (b, a) };
    vec![HandCluster { hand: Handedness::Left, cloud: left }, HandCluster { hand: Handedness::Right, cloud: right }]
}
