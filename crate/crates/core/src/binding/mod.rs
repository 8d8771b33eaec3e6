//! Turns a point cloud into solver constraints.
//!
//! Each cloud point is assigned to the nearest hull (full surface distance,
//! zero inside). The attachment feature is then picked among the faces of
//! that hull which face the camera, so data seen from the front never pulls
//! on a back face.

use thiserror::Error;

use crate::dynamics::{BodySet, Constraint};
use crate::geometry::{inverse_transform_point, transform_point, ConvexPolyhedron, RigidPose, Vec3};
use crate::sensor::{BoundaryPlaneSet, PointCloud};

/// A hull placed in the camera frame.
pub type PosedHull<'a> = (&'a ConvexPolyhedron, RigidPose);

/// Speed the summed surface caps could give the whole model in one step.
pub const DEFAULT_MAX_SPEED: f64 = 3.0;
/// Cap multiplier for points whose body is known.
pub const FEATURE_CAP_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindingError {
    #[error("label {label} references point {point} but the cloud has {len} points")]
    PointOutOfRange { label: usize, point: usize, len: usize },
    #[error("label {label} allows no bodies")]
    EmptyLabel { label: usize },
    #[error("label {label} references unknown body {body}")]
    UnknownBody { label: usize, body: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointAssignment {
    pub point: usize,
    pub body: usize,
    /// Attachment face (camera-facing where possible).
    pub face: usize,
    /// Attachment point on `face`, camera frame.
    pub surface_point: Vec3,
    /// Attachment point, body frame.
    pub local_point: Vec3,
    /// Outward normal of `face`, camera frame.
    pub normal: Vec3,
    /// The cloud point.
    pub target: Vec3,
    /// Distance from the cloud point to the hull; zero inside.
    pub distance: f64,
}

/// Restricts one cloud point to a set of bodies.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLabel {
    pub point: usize,
    pub allowed: Vec<usize>,
}

pub fn posed_hulls(bodies: &BodySet) -> Vec<PosedHull<'_>> {
    bodies.bodies().iter().map(|b| (b.shape.as_ref(), b.pose)).collect()
}

/// Surface attachment cap so that all `live` attachments together can move
/// `total_mass` at `max_speed`.
pub fn surface_cap(total_mass: f64, live: usize, max_speed: f64) -> f64 {
    if live == 0 {
        return 0.0;
    }
    total_mass * max_speed / live as f64
}

struct Culling {
    centers: Vec<Vec3>,
    radii: Vec<f64>,
}

impl Culling {
    fn new(bodies: &[PosedHull]) -> Self {
        Self {
            centers: bodies.iter().map(|(h, p)| transform_point(p, &h.centroid())).collect(),
            radii: bodies.iter().map(|(h, _)| h.bounding_radius()).collect(),
        }
    }
}

/// Nearest body among `candidates` by hull distance, ties to the lowest
/// index.
fn nearest_body(q: &Vec3, bodies: &[PosedHull], cull: &Culling, candidates: impl Iterator<Item = usize>) -> Option<(usize, f64)> {
    let mut order: Vec<(f64, usize)> = candidates
        .map(|i| (((q - cull.centers[i]).norm() - cull.radii[i]).max(0.0), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best: Option<(usize, f64)> = None;
    for (lb, i) in order {
        let bound = best.map_or(f64::INFINITY, |b| b.1);
        if lb > bound {
            break;
        }
        let (h, p) = &bodies[i];
        if let Some(cp) = h.closest_point_within(&inverse_transform_point(p, q), bound) {
            let better = match best {
                None => true,
                Some((bi, bd)) => cp.distance < bd || (cp.distance == bd && i < bi),
            };
            if better {
                best = Some((i, cp.distance));
            }
        }
    }
    best
}

fn attach(point: usize, q: &Vec3, body: usize, distance: f64, bodies: &[PosedHull]) -> PointAssignment {
    let (h, pose) = &bodies[body];
    let local = inverse_transform_point(pose, q);
    let cam = inverse_transform_point(pose, &Vec3::zeros());
    let faces = h.faces();
    let cp = h
        .closest_point_on_faces(&local, |i| faces[i].normal.dot(&cam) > faces[i].offset)
        .unwrap_or_else(|| h.closest_point_local(&local));
    PointAssignment {
        point,
        body,
        face: cp.face,
        surface_point: transform_point(pose, &cp.point),
        local_point: cp.point,
        normal: pose.rotation * faces[cp.face].normal,
        target: *q,
        distance,
    }
}

/// Assigns every cloud point to its nearest body. Empty when there are no
/// bodies.
pub fn assign_points(cloud: &PointCloud, bodies: &[PosedHull]) -> Vec<PointAssignment> {
    if bodies.is_empty() {
        return Vec::new();
    }
    let cull = Culling::new(bodies);
    cloud
        .points
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let (body, d) = nearest_body(q, bodies, &cull, 0..bodies.len()).expect("at least one body");
            attach(k, q, body, d, bodies)
        })
        .collect()
}

/// Nearest body and hull distance per cloud point, without resolving the
/// attachment feature.
pub fn nearest_bodies(cloud: &PointCloud, bodies: &[PosedHull]) -> Vec<(usize, f64)> {
    if bodies.is_empty() {
        return Vec::new();
    }
    let cull = Culling::new(bodies);
    cloud
        .points
        .iter()
        .map(|q| nearest_body(q, bodies, &cull, 0..bodies.len()).expect("at least one body"))
        .collect()
}

/// Assignment restricted per point to the label's allowed bodies.
pub fn assign_labeled(
    labels: &[FeatureLabel],
    cloud: &PointCloud,
    bodies: &[PosedHull],
) -> Result<Vec<PointAssignment>, BindingError> {
    let cull = Culling::new(bodies);
    labels
        .iter()
        .enumerate()
        .map(|(k, l)| {
            if l.point >= cloud.len() {
                return Err(BindingError::PointOutOfRange { label: k, point: l.point, len: cloud.len() });
            }
            if l.allowed.is_empty() {
                return Err(BindingError::EmptyLabel { label: k });
            }
            if let Some(&b) = l.allowed.iter().find(|&&b| b >= bodies.len()) {
                return Err(BindingError::UnknownBody { label: k, body: b });
            }
            let q = &cloud.points[l.point];
            let (body, d) = nearest_body(q, bodies, &cull, l.allowed.iter().copied()).expect("non-empty");
            Ok(attach(l.point, q, body, d, bodies))
        })
        .collect()
}

/// One capped attachment per assignment, pulling the surface point toward
/// the cloud point. A point sitting exactly on the surface pulls along the
/// face normal.
pub fn make_surface_constraints(assignments: &[PointAssignment], cap: f64) -> Vec<Constraint> {
    assignments
        .iter()
        .map(|a| {
            let gap = a.target - a.surface_point;
            let n = gap.norm();
            let direction = if n > 1e-9 { gap / n } else { a.normal };
            Constraint::SurfaceAttachment {
                body: a.body,
                face: a.face,
                local_point: a.local_point,
                target: a.target,
                direction,
                cap,
            }
        })
        .collect()
}

/// Attachments for labeled points, with the cap raised by
/// [`FEATURE_CAP_FACTOR`].
pub fn bind_known_features(
    labels: &[FeatureLabel],
    cloud: &PointCloud,
    bodies: &[PosedHull],
    cap: f64,
) -> Result<Vec<Constraint>, BindingError> {
    Ok(make_surface_constraints(&assign_labeled(labels, cloud, bodies)?, cap * FEATURE_CAP_FACTOR))
}

/// Contact planes for bodies poking out of the observed envelope. A body
/// gets a plane only when some vertex lies more than `tolerance` outside
/// it; the plane is then relaxed outward by `tolerance` so bodies that
/// legitimately reach past the sampled silhouette are not pushed back.
pub fn make_boundary_constraints(planes: &BoundaryPlaneSet, bodies: &[PosedHull], tolerance: f64) -> Vec<Constraint> {
    let mut out = Vec::new();
    for (b, (h, pose)) in bodies.iter().enumerate() {
        let world: Vec<Vec3> = h.vertices().iter().map(|v| transform_point(pose, v)).collect();
        for pl in &planes.planes {
            if world.iter().any(|v| pl.signed_distance(v) < -tolerance) {
                out.push(Constraint::ContactPlane { body: b, normal: pl.normal, offset: pl.offset - tolerance });
            }
        }
    }
    out
}
