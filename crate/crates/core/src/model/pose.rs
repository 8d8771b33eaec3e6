//! Named hand poses used by scenarios and tests.

use serde::{Deserialize, Serialize};

use super::ArticulatedModel;
use crate::dynamics::JointAngles;
use crate::geometry::{Mat3, RigidPose, UnitQuaternion, Vec3};

/// Root transform plus one angle triple per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub root: RigidPose,
    pub angles: Vec<JointAngles>,
}

/// Per-digit articulation in degrees, thumb first. `curl` in [0, 1]
/// blends from straight to a closed fist; `spread` in [0, 1] blends from
/// the rest splay to fingers held together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitState {
    pub curl: f64,
    pub spread: f64,
    /// Extra knuckle flexion in degrees, applied with straight fingers.
    #[serde(default)]
    pub knuckle_bend: f64,
}

impl Default for DigitState {
    fn default() -> Self {
        Self { curl: 0.0, spread: 0.0, knuckle_bend: 0.0 }
    }
}

/// Rotation taking the model frame to a camera view of the palm with the
/// fingers pointing up the image: model x to camera -y, model y (out of
/// the palm) to camera -z, model z to camera +x.
pub fn palm_facing_rotation() -> UnitQuaternion {
    let m = Mat3::from_columns(&[-Vec3::y(), -Vec3::z(), Vec3::x()]);
    UnitQuaternion::from_matrix(&m)
}

/// Palm-facing root placing the model point (0.1, 0, 0), the middle of a
/// 20 cm hand, at `center` in camera coordinates.
pub fn palm_facing_root(center: Vec3) -> RigidPose {
    let rot = palm_facing_rotation();
    RigidPose::from_parts((center - rot * Vec3::new(0.1, 0.0, 0.0)).into(), rot)
}

const FIST_FINGER: [f64; 3] = [85.0, 100.0, 65.0];
const FIST_THUMB: [f64; 3] = [35.0, 45.0, 55.0];
/// Knuckle-to-tip flexion of a closed fist in degrees (0 = thumb).
pub fn fist_flexion(finger: usize) -> [f64; 3] {
    if finger == 0 {
        FIST_THUMB
    } else {
        FIST_FINGER
    }
}

/// Abduction that cancels each finger's rest splay (index..pinky).
const CLOSE_SPLAY: [f64; 4] = [6.0, 0.0, -6.0, -12.0];

impl HandPose {
    pub fn neutral(model: &ArticulatedModel, root: RigidPose) -> Self {
        Self { root, angles: vec![JointAngles { twist: 0.0, swing_y: 0.0, swing_z: 0.0 }; model.joints.len()] }
    }

    /// Builds a pose from per-digit states. Digits missing from the model
    /// are skipped; mirrored models get mirrored abduction.
    pub fn from_digits(model: &ArticulatedModel, root: RigidPose, digits: &[DigitState; 5]) -> Self {
        let mut pose = Self::neutral(model, root);
        let mirror = if model.is_left() { -1.0 } else { 1.0 };
        for (f, st) in digits.iter().enumerate() {
            let Some(chain) = model.finger_chain(f) else { continue };
            let fist = if f == 0 { FIST_THUMB } else { FIST_FINGER };
            for (k, &body) in chain.iter().enumerate() {
                let Some(j) = model.joint_of_child(body) else { continue };
                let a = &mut pose.angles[j];
                a.swing_z = (st.curl * fist[k] + if k == 0 { st.knuckle_bend } else { 0.0 }).to_radians();
                if k == 0 && f > 0 {
                    a.swing_y = mirror * (st.spread * CLOSE_SPLAY[f - 1]).to_radians();
                }
            }
        }
        pose
    }

    pub fn open(model: &ArticulatedModel, root: RigidPose) -> Self {
        Self::from_digits(model, root, &[DigitState::default(); 5])
    }

    pub fn fist(model: &ArticulatedModel, root: RigidPose) -> Self {
        Self::from_digits(model, root, &[DigitState { curl: 1.0, spread: 1.0, knuckle_bend: 0.0 }; 5])
    }

    /// Fist with the listed digits (0 = thumb .. 4 = pinky) straight.
    pub fn extended(model: &ArticulatedModel, root: RigidPose, digits: &[usize]) -> Self {
        let mut st = [DigitState { curl: 1.0, spread: 1.0, knuckle_bend: 0.0 }; 5];
        for &d in digits {
            st[d] = DigitState::default();
        }
        Self::from_digits(model, root, &st)
    }

    pub fn body_poses(&self, model: &ArticulatedModel) -> Vec<RigidPose> {
        model.forward_kinematics(&self.root, &self.angles)
    }

    /// Linear blend of translation and angles, spherical blend of the root
    /// rotation.
    pub fn lerp(&self, other: &HandPose, t: f64) -> HandPose {
        let tr = self.root.translation.vector.lerp(&other.root.translation.vector, t);
        let rot = self.root.rotation.slerp(&other.root.rotation, t);
        let angles = self
            .angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| JointAngles {
                twist: a.twist + (b.twist - a.twist) * t,
                swing_y: a.swing_y + (b.swing_y - a.swing_y) * t,
                swing_z: a.swing_z + (b.swing_z - a.swing_z) * t,
            })
            .collect();
        HandPose { root: RigidPose::from_parts(tr.into(), rot), angles }
    }
}
