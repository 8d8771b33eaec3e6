//! The built-in hand.
//!
//! Model frame: x runs from the wrist toward the fingertips, y points out
//! of the palm (volar side) and z points toward the thumb, so for the right
//! hand the frame is right-handed with the thumb on +z. The wrist starts at
//! x = 0 and the middle fingertip ends at x = 0.200.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{mirror_model, ArticulatedModel, Body, Joint, FINGERS};
use crate::dynamics::JointLimits;
use crate::geometry::{inverse_transform_point, transform_point, ConvexPolyhedron, RigidPose, UnitQuaternion, Vec3};

const DENSITY: f64 = 1000.0;

struct Digit {
    base: Vec3,
    rotation: UnitQuaternion,
    lengths: [f64; 3],
    half_width: f64,
    limits: [JointLimits; 3],
}

fn deg(d: f64) -> f64 {
    d.to_radians()
}

fn lim(twist: [f64; 2], abd: [f64; 2], flex: [f64; 2]) -> JointLimits {
    JointLimits {
        twist: [deg(twist[0]), deg(twist[1])],
        swing_y: [deg(abd[0]), deg(abd[1])],
        swing_z: [deg(flex[0]), deg(flex[1])],
    }
}

/// Capsule-like bone: two square rings joined by pointed caps. The bone
/// runs along +x from the joint at the origin. A distal bone ends exactly
/// at `length`; other bones overhang both joints by the cap.
fn phalanx(length: f64, w0: f64, w1: f64, distal: bool) -> ConvexPolyhedron {
    let cap = 0.8 * w0;
    let (x1, tip) = if distal { (length - 0.8 * w1, length) } else { (length, length + 0.8 * w1) };
    let mut pts = vec![Vec3::new(-cap, 0.0, 0.0), Vec3::new(tip, 0.0, 0.0)];
    for (x, w) in [(0.0, w0), (x1, w1)] {
        for (sy, sz) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            pts.push(Vec3::new(x, sy * w, sz * w));
        }
    }
    ConvexPolyhedron::from_points(&pts).expect("phalanx hull is valid")
}

fn slab(outline: &[(f64, f64)], volar: f64, dorsal: f64, origin: Vec3) -> ConvexPolyhedron {
    let mut pts = Vec::new();
    for &(x, z) in outline {
        pts.push(Vec3::new(x, volar, z) - origin);
        pts.push(Vec3::new(x, -dorsal, z) - origin);
    }
    ConvexPolyhedron::from_points(&pts).expect("slab hull is valid")
}

fn rot_y(a: f64) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(&Vec3::y_axis(), deg(a))
}

fn rot_z(a: f64) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(&Vec3::z_axis(), deg(a))
}

fn digits() -> [Digit; 5] {
    let knuckle = lim([-10.0, 10.0], [-25.0, 25.0], [-30.0, 100.0]);
    let ip = lim([0.0, 0.0], [0.0, 0.0], [0.0, 110.0]);
    let finger = |x: f64, z: f64, splay: f64, lengths: [f64; 3], half_width: f64| Digit {
        base: Vec3::new(x, 0.0, z),
        // Positive splay turns the finger toward +z.
        rotation: rot_y(-splay),
        lengths,
        half_width,
        limits: [knuckle, ip, ip],
    };
    [
        Digit {
            base: Vec3::new(0.035, 0.004, 0.028),
            rotation: rot_y(-40.0) * rot_z(20.0),
            lengths: [0.040, 0.030, 0.026],
            half_width: 0.0085 * 1.1,
            limits: [
                lim([-20.0, 20.0], [-30.0, 40.0], [-20.0, 50.0]),
                lim([-5.0, 5.0], [-10.0, 10.0], [-10.0, 60.0]),
                lim([0.0, 0.0], [0.0, 0.0], [-10.0, 80.0]),
            ],
        },
        finger(0.101, 0.0285, 6.0, [0.040, 0.025, 0.020], 0.0085),
        finger(0.105, 0.0095, 0.0, [0.045, 0.028, 0.022], 0.0085),
        finger(0.101, -0.0095, -6.0, [0.042, 0.027, 0.021], 0.0085),
        finger(0.094, -0.0285, -12.0, [0.033, 0.020, 0.019], 0.0085 * 0.85),
    ]
}

fn body(name: &str, shape: ConvexPolyhedron, rest_pose: RigidPose) -> Body {
    let mass = shape.volume() * DENSITY;
    Body { name: name.to_string(), shape: Arc::new(shape), mass, rest_pose }
}

fn joint(bodies: &[Body], parent: usize, child: usize, center: Vec3, limits: JointLimits) -> Joint {
    let (p, c) = (&bodies[parent].rest_pose, &bodies[child].rest_pose);
    Joint {
        parent,
        child,
        parent_anchor: inverse_transform_point(p, &center),
        child_anchor: inverse_transform_point(c, &center),
        parent_frame: p.rotation.inverse() * c.rotation,
        limits,
    }
}

/// Built-in right hand: wrist, palm and three bones per digit (17 bodies).
pub fn default_hand() -> ArticulatedModel {
    let mut bodies = Vec::new();
    let mut joints = Vec::new();
    let mut tags: BTreeMap<String, Vec<usize>> = BTreeMap::new();

    let wrist_outline = [(0.0, -0.027), (0.0, 0.027), (0.032, 0.029), (0.032, -0.029)];
    bodies.push(body("wrist", slab(&wrist_outline, 0.012, 0.012, Vec3::zeros()), RigidPose::identity()));
    let palm_origin = Vec3::new(0.026, 0.0, 0.0);
    let palm_outline = [
        (0.022, -0.031),
        (0.022, 0.032),
        (0.065, 0.040),
        (0.106, 0.033),
        (0.108, -0.020),
        (0.098, -0.038),
    ];
    bodies.push(body(
        "palm",
        slab(&palm_outline, 0.014, 0.012, palm_origin),
        RigidPose::from_parts(palm_origin.into(), UnitQuaternion::identity()),
    ));
    joints.push(joint(&bodies, 0, 1, palm_origin, lim([-15.0, 15.0], [-20.0, 30.0], [-70.0, 80.0])));
    tags.insert("wrist".into(), vec![0]);
    tags.insert("palm".into(), vec![1]);

    let bone_names = ["prox", "mid", "dist"];
    for (f, d) in digits().iter().enumerate() {
        let mut chain = Vec::new();
        let mut start = d.base;
        let dir = d.rotation * Vec3::x();
        let mut parent = 1;
        for k in 0..3 {
            let names = if f == 0 { ["meta", "prox", "dist"] } else { bone_names };
            let w0 = d.half_width * [1.0, 0.92, 0.85][k];
            let w1 = d.half_width * [0.92, 0.85, 0.75][k];
            let shape = phalanx(d.lengths[k], w0, w1, k == 2);
            let idx = bodies.len();
            bodies.push(body(
                &format!("{}_{}", FINGERS[f], names[k]),
                shape,
                RigidPose::from_parts(start.into(), d.rotation),
            ));
            joints.push(joint(&bodies, parent, idx, start, d.limits[k]));
            chain.push(idx);
            parent = idx;
            start += dir * d.lengths[k];
        }
        tags.insert(format!("fingertip.{}", FINGERS[f]), vec![chain[2]]);
        tags.insert(format!("finger_chain.{}", FINGERS[f]), chain.clone());
        if f == 0 {
            tags.insert("thumb".into(), chain);
        }
    }
    let group = |k: usize| (1..5).map(|f| tags[&format!("finger_chain.{}", FINGERS[f])][k]).collect::<Vec<_>>();
    let (tip, mid) = (group(2), group(1));
    tags.insert("knuckle_group_tip".into(), tip);
    tags.insert("knuckle_group_mid".into(), mid);

    let disabled_pairs = neighbor_pairs(&bodies, &joints);
    let model = ArticulatedModel { name: "right_hand".into(), bodies, joints, disabled_pairs, tags };
    model.validate().expect("default hand is valid");
    model
}

/// Built-in left hand, the mirror image of [`default_hand`].
pub fn default_left_hand() -> ArticulatedModel {
    mirror_model(&default_hand(), "left_hand").expect("mirrored hand is valid")
}

/// Jointed pairs plus any pair whose rest-pose hulls touch.
fn neighbor_pairs(bodies: &[Body], joints: &[Joint]) -> Vec<(usize, usize)> {
    let mut set: BTreeSet<(usize, usize)> = joints.iter().map(|j| (j.parent.min(j.child), j.parent.max(j.child))).collect();
    for a in 0..bodies.len() {
        for b in a + 1..bodies.len() {
            if touches(&bodies[a], &bodies[b]) || touches(&bodies[b], &bodies[a]) {
                set.insert((a, b));
            }
        }
    }
    set.into_iter().collect()
}

fn touches(a: &Body, b: &Body) -> bool {
    a.shape.vertices().iter().any(|v| {
        let w = transform_point(&a.rest_pose, v);
        b.shape.contains(&inverse_transform_point(&b.rest_pose, &w), 1e-3)
    })
}
