//! Vector and rotation algebra plus convex-polyhedron queries.
//!
//! Points, directions and poses are thin aliases over `nalgebra` types. All
//! lengths are meters.

mod hull;
mod lp;
mod polyhedron;

pub use hull::convex_hull;
pub use lp::{maximize, LpOutcome};
pub use polyhedron::{
    closest_point_on_body, ClosestPoint, ConvexPolyhedron, Face, MassProperties,
};

use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type UnitQuaternion = nalgebra::UnitQuaternion<f64>;
/// Rigid transform from a body frame into the world (camera) frame.
pub type RigidPose = nalgebra::Isometry3<f64>;

/// Global geometric tolerance, meters.
pub const GEOM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("polyhedron needs at least 4 vertices and 4 faces (got {vertices} vertices, {faces} faces)")]
    TooSmall { vertices: usize, faces: usize },
    #[error("non-finite coordinate in vertex {0}")]
    NonFinite(usize),
    #[error("degenerate hull: {0}")]
    Degenerate(String),
    #[error("face {face} references vertex {vertex} which does not exist")]
    BadIndex { face: usize, vertex: usize },
    #[error("face {face} is not planar (vertex {vertex} off plane by {offset:.3e} m)")]
    NonPlanar { face: usize, vertex: usize, offset: f64 },
    #[error("hull is not convex: vertex {vertex} lies {excess:.3e} m outside face {face}")]
    NonConvex { face: usize, vertex: usize, excess: f64 },
}

/// Applies a pose to a point.
#[inline]
pub fn transform_point(pose: &RigidPose, p: &Vec3) -> Vec3 {
    pose.rotation * p + pose.translation.vector
}

/// Maps a world point into the frame described by `pose`.
#[inline]
pub fn inverse_transform_point(pose: &RigidPose, p: &Vec3) -> Vec3 {
    pose.rotation.inverse_transform_vector(&(p - pose.translation.vector))
}

/// Builds a pose from a translation and a rotation.
#[inline]
pub fn pose(translation: Vec3, rotation: UnitQuaternion) -> RigidPose {
    RigidPose::from_parts(translation.into(), rotation)
}

/// Skew-symmetric cross-product matrix.
#[inline]
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Returns any unit vector perpendicular to `v` (which must be nonzero).
pub fn any_perpendicular(v: &Vec3) -> Vec3 {
    let a = if v.x.abs() < 0.57 {
        Vec3::x()
    } else if v.y.abs() < 0.57 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    v.cross(&a).normalize()
}
