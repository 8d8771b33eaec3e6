use phystrack::dynamics::{step_world, JointAngles, SolverConfig};
use phystrack::geometry::{closest_point_on_body, transform_point, RigidPose, Vec3};
use phystrack::model::*;

#[test]
fn default_hand_has_seventeen_bones() {
    let m = default_hand();
    assert_eq!(m.bodies.len(), 17);
    assert_eq!(m.joints.len(), 16);
    assert!(m.fingertips().iter().all(Option::is_some));
    for f in 0..5 {
        assert_eq!(m.finger_chain(f).unwrap().len(), 3);
    }
}

#[test]
fn default_hand_is_twenty_centimetres_long() {
    let m = default_hand();
    assert!((m.length() - 0.200).abs() < 1e-3, "length {}", m.length());
    // The far end is the middle fingertip.
    let tip = m.fingertips()[2].unwrap();
    let b = &m.bodies[tip];
    let far = b.shape.vertices().iter().map(|v| transform_point(&b.rest_pose, v).x).fold(f64::MIN, f64::max);
    assert!((far - 0.200).abs() < 1e-9);
}

#[test]
fn jointed_pairs_are_collision_disabled() {
    let m = default_hand();
    for j in &m.joints {
        let key = (j.parent.min(j.child), j.parent.max(j.child));
        assert!(m.disabled_pairs.contains(&key), "{key:?}");
    }
}

#[test]
fn neighbouring_hulls_interpenetrate_at_rest() {
    let m = default_hand();
    for (i, j) in m.joints.iter().enumerate() {
        let c = m.joint_center(i);
        for b in [j.parent, j.child] {
            let body = &m.bodies[b];
            let cp = closest_point_on_body(&body.shape, &body.rest_pose, &c);
            assert_eq!(cp.distance, 0.0, "joint {i} center outside {}", body.name);
        }
    }
}

#[test]
fn zero_angles_reproduce_rest_pose() {
    let m = default_hand();
    let poses = m.forward_kinematics(&RigidPose::identity(), &[]);
    for (p, b) in poses.iter().zip(&m.bodies) {
        assert!((p.translation.vector - b.rest_pose.translation.vector).norm() < 1e-12);
        assert!(p.rotation.angle_to(&b.rest_pose.rotation) < 1e-9);
    }
}

#[test]
fn serialize_load_roundtrip_is_identity() {
    for m in [default_hand(), default_left_hand()] {
        let text = serialize_model(&m);
        assert_eq!(load_model(&text).unwrap(), m);
    }
}

#[test]
fn shipped_model_file_matches_builder() {
    let text = include_str!("../models/right_hand.json");
    assert_eq!(load_model(text).unwrap(), default_hand());
}

fn edit(f: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&serialize_model(&default_hand())).unwrap();
    f(&mut v);
    v.to_string()
}

#[test]
fn loader_errors_are_distinct() {
    let cycle = edit(|v| {
        // Re-parent the wrist-to-palm joint onto the index tip: the palm
        // keeps one parent but the graph now has a cycle and orphans the
        // wrist subtree.
        v["joints"][0]["parent"] = "index_dist".into();
    });
    let e1 = load_model(&cycle).unwrap_err();
    assert!(matches!(e1, ModelError::NonTree(_)), "{e1}");

    let no_palm = edit(|v| {
        v["tags"].as_object_mut().unwrap().remove("palm");
    });
    let e2 = load_model(&no_palm).unwrap_err();
    assert_eq!(e2, ModelError::MissingTag("palm".into()));

    let dent = edit(|v| {
        let verts = v["bodies"][1]["vertices"].as_array_mut().unwrap();
        verts[0] = serde_json::json!([0.05, 0.0, 0.0]);
    });
    let e3 = load_model(&dent).unwrap_err();
    assert!(matches!(e3, ModelError::InvalidHull { .. }), "{e3}");

    let e4 = load_model("{ not json").unwrap_err();
    assert!(matches!(e4, ModelError::Parse(_)));

    let codes = [e1.code(), e2.code(), e3.code(), e4.code()];
    let mut dedup = codes.to_vec();
    dedup.sort();
    dedup.dedup();
    assert_eq!(dedup.len(), 4);
}

#[test]
fn unit_scaling_is_identity() {
    let m = default_hand();
    let s = scale_model(&m, HandScaling { length_scale: 1.0, width_scale: 1.0 }).unwrap();
    assert_eq!(s.bodies.len(), m.bodies.len());
    for (a, b) in s.bodies.iter().zip(&m.bodies) {
        assert!((a.mass - b.mass).abs() < 1e-15);
        for (p, q) in a.shape.vertices().iter().zip(b.shape.vertices()) {
            assert!((p - q).norm() < 1e-15);
        }
    }
}

#[test]
fn length_scaling_is_linear_and_revalidates() {
    let m = default_hand();
    let s = scale_model(&m, HandScaling { length_scale: 1.1, width_scale: 1.0 }).unwrap();
    assert!((s.length() - 0.22).abs() < 1e-3);
    s.validate().unwrap();
    let w = scale_model(&m, HandScaling { length_scale: 0.9, width_scale: 1.2 }).unwrap();
    for (a, b) in w.bodies.iter().zip(&m.bodies) {
        let vol_ratio = a.shape.volume() / b.shape.volume();
        assert!((vol_ratio - 0.9 * 1.44).abs() < 1e-9);
        assert!((a.mass / b.mass - 0.9 * 1.44).abs() < 1e-12);
    }
    // Joints still coincide after scaling.
    for i in 0..w.joints.len() {
        let j = &w.joints[i];
        let a = transform_point(&w.bodies[j.parent].rest_pose, &j.parent_anchor);
        let b = transform_point(&w.bodies[j.child].rest_pose, &j.child_anchor);
        assert!((a - b).norm() < 1e-12);
    }
    assert!(matches!(
        scale_model(&m, HandScaling { length_scale: 2.5, width_scale: 1.0 }),
        Err(ModelError::Scaling(_))
    ));
}

#[test]
fn mirrored_hand_reflects_poses() {
    let r = default_hand();
    let l = default_left_hand();
    let angles: Vec<JointAngles> = (0..16)
        .map(|i| JointAngles { twist: 0.02 * i as f64, swing_y: -0.03, swing_z: 0.1 + 0.01 * i as f64 })
        .collect();
    let mirrored: Vec<JointAngles> = angles.iter().map(mirror_angles).collect();
    let pr = r.forward_kinematics(&RigidPose::identity(), &angles);
    let pl = l.forward_kinematics(&RigidPose::identity(), &mirrored);
    for b in 0..17 {
        for (vr, vl) in r.bodies[b].shape.vertices().iter().zip(l.bodies[b].shape.vertices()) {
            let wr = transform_point(&pr[b], vr);
            let wl = transform_point(&pl[b], vl);
            assert!((Vec3::new(wr.x, wr.y, -wr.z) - wl).norm() < 1e-12);
        }
    }
}

#[test]
fn hand_at_rest_is_in_equilibrium() {
    let m = default_hand();
    let poses = m.rest_poses(&RigidPose::identity());
    let mut bodies = m.build_bodies(&poses).unwrap();
    let cs = m.structural_constraints();
    for _ in 0..60 {
        step_world(&mut bodies, &cs, &SolverConfig::default()).unwrap();
    }
    for (p, q) in bodies.poses().iter().zip(&poses) {
        assert!((p.translation.vector - q.translation.vector).norm() < 1e-9);
        assert!(p.rotation.angle_to(&q.rotation) < 1e-9);
    }
}
