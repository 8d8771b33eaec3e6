//! Articulated models: bodies, joints with swing/twist limits, collision
//! exclusions and semantic tags. Ships the default 17-bone right hand.

mod file;
mod hand;
mod pose;

pub use file::{load_model, serialize_model, MODEL_SCHEMA};
pub use hand::{default_hand, default_left_hand};
pub use pose::{fist_flexion, palm_facing_root, palm_facing_rotation, DigitState, HandPose};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{limit_violation, measure_joint_angles, BodySet, Constraint, DynamicsError, JointAngles, JointLimits, RigidBody};
use crate::geometry::{transform_point, ConvexPolyhedron, GeometryError, RigidPose, UnitQuaternion, Vec3};

/// Finger names in thumb-to-pinky order. Tag keys use these names.
pub const FINGERS: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("model file does not parse: {0}")]
    Parse(String),
    #[error("unsupported model schema {0:?}")]
    Schema(String),
    #[error("joint graph is not a tree rooted at the wrist: {0}")]
    NonTree(String),
    #[error("hull of body {body:?} is invalid: {source}")]
    InvalidHull { body: String, source: GeometryError },
    #[error("required tag {0:?} is missing")]
    MissingTag(String),
    #[error("unknown body {0:?}")]
    UnknownBody(String),
    #[error("joint {joint} has invalid limits")]
    InvalidLimits { joint: usize },
    #[error("body {0:?} has non-positive or non-finite mass")]
    InvalidMass(String),
    #[error("invalid tag {tag:?}: {reason}")]
    InvalidTag { tag: String, reason: String },
    #[error("scaling {0} is outside [0.5, 2.0]")]
    Scaling(f64),
}

impl ModelError {
    /// Stable numeric code per error kind.
    pub fn code(&self) -> i32 {
        match self {
            ModelError::Parse(_) => 10,
            ModelError::Schema(_) => 11,
            ModelError::NonTree(_) => 12,
            ModelError::InvalidHull { .. } => 13,
            ModelError::MissingTag(_) => 14,
            ModelError::UnknownBody(_) => 15,
            ModelError::InvalidLimits { .. } => 16,
            ModelError::InvalidMass(_) => 17,
            ModelError::InvalidTag { .. } => 18,
            ModelError::Scaling(_) => 19,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub name: String,
    pub shape: Arc<ConvexPolyhedron>,
    pub mass: f64,
    /// Body frame to model frame at the rest pose.
    pub rest_pose: RigidPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub parent: usize,
    pub child: usize,
    /// Joint center in the parent body frame.
    pub parent_anchor: Vec3,
    /// Joint center in the child body frame.
    pub child_anchor: Vec3,
    /// Joint frame relative to the parent body; at zero joint angles the
    /// child's orientation equals `parent * parent_frame`.
    pub parent_frame: UnitQuaternion,
    pub limits: JointLimits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArticulatedModel {
    pub name: String,
    pub bodies: Vec<Body>,
    pub joints: Vec<Joint>,
    pub disabled_pairs: Vec<(usize, usize)>,
    /// Semantic role to body indices. Keys: `palm`, `wrist`, `thumb`,
    /// `fingertip.<finger>`, `finger_chain.<finger>` (proximal to distal),
    /// `knuckle_group_tip`, `knuckle_group_mid` (neighbor order).
    pub tags: BTreeMap<String, Vec<usize>>,
}

/// Anisotropic runtime scaling: model x by `length_scale`, y and z by
/// `width_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandScaling {
    pub length_scale: f64,
    pub width_scale: f64,
}

impl Default for HandScaling {
    fn default() -> Self {
        Self { length_scale: 1.0, width_scale: 1.0 }
    }
}

impl ArticulatedModel {
    /// Checks every model invariant. Called by the loader and by
    /// [`scale_model`].
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.bodies.len();
        for b in &self.bodies {
            if !(b.mass.is_finite() && b.mass > 0.0) {
                return Err(ModelError::InvalidMass(b.name.clone()));
            }
        }
        for (i, j) in self.joints.iter().enumerate() {
            if j.parent >= n || j.child >= n {
                return Err(ModelError::NonTree(format!("joint {i} references a missing body")));
            }
            if !j.limits.is_well_ordered() {
                return Err(ModelError::InvalidLimits { joint: i });
            }
        }
        for &(a, b) in &self.disabled_pairs {
            if a >= n || b >= n {
                return Err(ModelError::UnknownBody(format!("disabled pair index {}", a.max(b))));
            }
        }
        let wrist = self.tag_one("wrist")?;
        self.tag_one("palm")?;
        self.joint_order_from(wrist)?;
        for f in FINGERS {
            if let Some(chain) = self.tags.get(&format!("finger_chain.{f}")) {
                if chain.len() != 3 {
                    return Err(ModelError::InvalidTag {
                        tag: format!("finger_chain.{f}"),
                        reason: format!("has {} bodies, expected 3", chain.len()),
                    });
                }
            }
        }
        for (tag, ids) in &self.tags {
            if ids.iter().any(|&i| i >= n) {
                return Err(ModelError::InvalidTag { tag: tag.clone(), reason: "body index out of range".into() });
            }
        }
        Ok(())
    }

    fn tag_one(&self, tag: &str) -> Result<usize, ModelError> {
        match self.tags.get(tag).map(|v| v.as_slice()) {
            Some([i]) => Ok(*i),
            Some(_) => Err(ModelError::InvalidTag { tag: tag.into(), reason: "expected exactly one body".into() }),
            None => Err(ModelError::MissingTag(tag.into())),
        }
    }

    pub fn wrist(&self) -> usize {
        self.tags["wrist"][0]
    }

    pub fn palm(&self) -> usize {
        self.tags["palm"][0]
    }

    pub fn tag(&self, key: &str) -> Option<&[usize]> {
        self.tags.get(key).map(|v| v.as_slice())
    }

    /// Fingertip body per finger, thumb first; `None` for untagged digits.
    pub fn fingertips(&self) -> [Option<usize>; 5] {
        FINGERS.map(|f| self.tag(&format!("fingertip.{f}")).and_then(|v| v.first().copied()))
    }

    pub fn finger_chain(&self, finger: usize) -> Option<[usize; 3]> {
        self.tag(&format!("finger_chain.{}", FINGERS[finger])).and_then(|v| v.try_into().ok())
    }

    /// End point of a digit: the distal body's vertex furthest along its
    /// bone axis, posed by `poses`.
    pub fn tip_point(&self, finger: usize, poses: &[RigidPose]) -> Option<Vec3> {
        let tip = self.fingertips()[finger]?;
        let v = self.bodies[tip]
            .shape
            .vertices()
            .iter()
            .copied()
            .max_by(|a, b| a.x.total_cmp(&b.x))?;
        Some(transform_point(&poses[tip], &v))
    }

    /// Joint whose child is `body`.
    pub fn joint_of_child(&self, body: usize) -> Option<usize> {
        self.joints.iter().position(|j| j.child == body)
    }

    /// True for a mirrored (left) hand: the thumb lies on model -z.
    pub fn is_left(&self) -> bool {
        match self.finger_chain(0) {
            Some(chain) => self.bodies[chain[0]].rest_pose.translation.vector.z < 0.0,
            None => false,
        }
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    /// Joints ordered so every parent is posed before its child.
    pub fn joint_order(&self) -> Vec<usize> {
        self.joint_order_from(self.wrist()).expect("validated model")
    }

    fn joint_order_from(&self, root: usize) -> Result<Vec<usize>, ModelError> {
        let n = self.bodies.len();
        if self.joints.len() + 1 != n {
            return Err(ModelError::NonTree(format!("{} bodies need {} joints, found {}", n, n - 1, self.joints.len())));
        }
        let mut parent_joint = vec![None; n];
        for (i, j) in self.joints.iter().enumerate() {
            if j.child == root {
                return Err(ModelError::NonTree("the wrist has a parent joint".into()));
            }
            if parent_joint[j.child].replace(i).is_some() {
                return Err(ModelError::NonTree(format!("body {:?} has two parents", self.bodies[j.child].name)));
            }
        }
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j) in self.joints.iter().enumerate() {
            children[j.parent].push(i);
        }
        let mut order = Vec::with_capacity(self.joints.len());
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(b) = queue.pop_front() {
            for &ji in &children[b] {
                let c = self.joints[ji].child;
                if seen[c] {
                    return Err(ModelError::NonTree("joint cycle".into()));
                }
                seen[c] = true;
                order.push(ji);
                queue.push_back(c);
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(ModelError::NonTree(format!("body {:?} is not reachable from the wrist", self.bodies[i].name)));
        }
        Ok(order)
    }

    /// Body poses for the given root transform (model frame to world) and
    /// per-joint angles (indexed like `joints`; missing entries are zero).
    pub fn forward_kinematics(&self, root: &RigidPose, angles: &[JointAngles]) -> Vec<RigidPose> {
        let mut poses = vec![RigidPose::identity(); self.bodies.len()];
        let w = self.wrist();
        poses[w] = root * self.bodies[w].rest_pose;
        for ji in self.joint_order() {
            let j = &self.joints[ji];
            let a = angles.get(ji).map(JointAngles::to_rotation).unwrap_or_else(UnitQuaternion::identity);
            let parent = poses[j.parent];
            let rot = parent.rotation * j.parent_frame * a;
            let center = transform_point(&parent, &j.parent_anchor);
            let t = center - rot * j.child_anchor;
            poses[j.child] = RigidPose::from_parts(t.into(), rot);
        }
        poses
    }

    /// Rest-pose body transforms composed with `root`.
    pub fn rest_poses(&self, root: &RigidPose) -> Vec<RigidPose> {
        self.bodies.iter().map(|b| root * b.rest_pose).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    /// Extent of the rest-pose model along the model x axis, m.
    pub fn length(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for b in &self.bodies {
            for v in b.shape.vertices() {
                let x = transform_point(&b.rest_pose, v).x;
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        hi - lo
    }

    /// Joint anchor in the model frame at the rest pose.
    pub fn joint_center(&self, joint: usize) -> Vec3 {
        let j = &self.joints[joint];
        transform_point(&self.bodies[j.parent].rest_pose, &j.parent_anchor)
    }

    /// Fresh dynamic bodies at `poses`.
    pub fn build_bodies(&self, poses: &[RigidPose]) -> Result<BodySet, DynamicsError> {
        let bodies = self
            .bodies
            .iter()
            .zip(poses)
            .map(|(b, p)| RigidBody::new(b.shape.clone(), b.mass, *p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BodySet::new(bodies))
    }

    /// Largest distance between the two sides of any joint anchor.
    pub fn anchor_drift(&self, poses: &[RigidPose]) -> f64 {
        self.joints
            .iter()
            .map(|j| {
                let a = transform_point(&poses[j.parent], &j.parent_anchor);
                let b = transform_point(&poses[j.child], &j.child_anchor);
                (a - b).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest joint-limit excess over all joints, radians.
    pub fn limit_excess(&self, poses: &[RigidPose]) -> f64 {
        self.joints
            .iter()
            .map(|j| limit_violation(&measure_joint_angles(&poses[j.parent], &poses[j.child], &j.parent_frame), &j.limits))
            .fold(0.0, f64::max)
    }

    /// Joints, limits and inter-body separation for every enabled pair.
    pub fn structural_constraints(&self) -> Vec<Constraint> {
        let mut out = Vec::new();
        for j in &self.joints {
            out.push(Constraint::BallJoint {
                parent: j.parent,
                child: j.child,
                parent_anchor: j.parent_anchor,
                child_anchor: j.child_anchor,
            });
            out.push(Constraint::AngularLimit {
                parent: j.parent,
                child: j.child,
                parent_frame: j.parent_frame,
                limits: j.limits,
            });
        }
        let disabled: BTreeSet<(usize, usize)> =
            self.disabled_pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        for a in 0..self.bodies.len() {
            for b in a + 1..self.bodies.len() {
                if !disabled.contains(&(a, b)) {
                    out.push(Constraint::Separation { a, b });
                }
            }
        }
        out
    }
}

/// Scales a model anisotropically in its own frame. Rest orientations,
/// joint frames and limits are kept; vertices, anchors and rest
/// translations are mapped; masses follow the volume change.
pub fn scale_model(model: &ArticulatedModel, scaling: HandScaling) -> Result<ArticulatedModel, ModelError> {
    for s in [scaling.length_scale, scaling.width_scale] {
        if !(0.5..=2.0).contains(&s) {
            return Err(ModelError::Scaling(s));
        }
    }
    let s = Vec3::new(scaling.length_scale, scaling.width_scale, scaling.width_scale);
    let map_model = |p: &Vec3| p.component_mul(&s);
    let mut out = model.clone();
    for (b, src) in out.bodies.iter_mut().zip(&model.bodies) {
        let rot = src.rest_pose.rotation;
        let local = |v: &Vec3| rot.inverse() * map_model(&(rot * v));
        let shape = src
            .shape
            .map_vertices(local, false)
            .map_err(|e| ModelError::InvalidHull { body: src.name.clone(), source: e })?;
        b.shape = Arc::new(shape);
        b.rest_pose = RigidPose::from_parts(map_model(&src.rest_pose.translation.vector).into(), rot);
        b.mass = src.mass * scaling.length_scale * scaling.width_scale * scaling.width_scale;
    }
    for (j, src) in out.joints.iter_mut().zip(&model.joints) {
        let rp = model.bodies[src.parent].rest_pose.rotation;
        let rc = model.bodies[src.child].rest_pose.rotation;
        j.parent_anchor = rp.inverse() * map_model(&(rp * src.parent_anchor));
        j.child_anchor = rc.inverse() * map_model(&(rc * src.child_anchor));
    }
    out.validate()?;
    Ok(out)
}

/// Mirror image across the model x-y plane (right hand to left hand).
/// Twist and abduction limits swap sign; flexion is unchanged.
pub fn mirror_model(model: &ArticulatedModel, name: &str) -> Result<ArticulatedModel, ModelError> {
    let flip = |v: &Vec3| Vec3::new(v.x, v.y, -v.z);
    // Conjugating a rotation by the reflection negates the x and y parts
    // of its axial vector.
    let flip_rot = |q: &UnitQuaternion| {
        UnitQuaternion::new_normalize(nalgebra::Quaternion::new(q.w, -q.i, -q.j, q.k))
    };
    let mut out = model.clone();
    out.name = name.to_string();
    for (b, src) in out.bodies.iter_mut().zip(&model.bodies) {
        let shape = src
            .shape
            .map_vertices(flip, true)
            .map_err(|e| ModelError::InvalidHull { body: src.name.clone(), source: e })?;
        b.shape = Arc::new(shape);
        b.rest_pose = RigidPose::from_parts(flip(&src.rest_pose.translation.vector).into(), flip_rot(&src.rest_pose.rotation));
    }
    for (j, src) in out.joints.iter_mut().zip(&model.joints) {
        j.parent_anchor = flip(&src.parent_anchor);
        j.child_anchor = flip(&src.child_anchor);
        j.parent_frame = flip_rot(&src.parent_frame);
        let neg = |[lo, hi]: [f64; 2]| [-hi, -lo];
        j.limits = JointLimits { twist: neg(src.limits.twist), swing_y: neg(src.limits.swing_y), swing_z: src.limits.swing_z };
    }
    out.validate()?;
    Ok(out)
}

/// Mirrors joint angles to match [`mirror_model`].
pub fn mirror_angles(a: &JointAngles) -> JointAngles {
    JointAngles { twist: -a.twist, swing_y: -a.swing_y, swing_z: a.swing_z }
}
