use std::sync::Arc;

use phystrack::binding::*;
use phystrack::dynamics::{lower_constraints, step_world, BodySet, Constraint, RigidBody, SolverConfig};
use phystrack::geometry::*;
use phystrack::harness::registration::{run_registration, RegistrationConfig};
use phystrack::model::{default_hand, scale_model, HandPose, HandScaling};
use phystrack::sensor::{BoundaryPlaneSet, Plane, PointCloud};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cube(h: f64) -> ConvexPolyhedron {
    let mut v = Vec::new();
    for x in [-h, h] {
        for y in [-h, h] {
            for z in [-h, h] {
                v.push(Vec3::new(x, y, z));
            }
        }
    }
    ConvexPolyhedron::from_points(&v).unwrap()
}

fn at(x: f64, y: f64, z: f64) -> RigidPose {
    pose(Vec3::new(x, y, z), UnitQuaternion::identity())
}

fn hand_scene() -> (phystrack::model::ArticulatedModel, Vec<RigidPose>) {
    let m = default_hand();
    let root = pose(Vec3::new(0.0, 0.0, 0.5), UnitQuaternion::identity());
    let poses = m.rest_poses(&root);
    (m, poses)
}

fn brute_distances(q: &Vec3, bodies: &[PosedHull]) -> Vec<f64> {
    bodies.iter().map(|(h, p)| closest_point_on_body(h, p, q).distance).collect()
}

#[test]
fn point_near_index_tip_goes_to_index_tip() {
    // A long hand, so the neighboring phalanx is also more than 3 cm away.
    let m = scale_model(&default_hand(), HandScaling { length_scale: 1.5, width_scale: 1.0 }).unwrap();
    let poses = HandPose::extended(&m, pose(Vec3::new(0.0, 0.0, 0.5), UnitQuaternion::identity()), &[1]).body_poses(&m);
    let hulls: Vec<PosedHull> = m.bodies.iter().zip(&poses).map(|(b, p)| (b.shape.as_ref(), *p)).collect();
    let tip = m.fingertips()[1].unwrap();
    let q = m.tip_point(1, &poses).unwrap() + poses[tip].rotation * Vec3::new(0.01, 0.0, 0.0);
    let d = brute_distances(&q, &hulls);
    assert!((d[tip] - 0.01).abs() < 1e-9);
    assert!(d.iter().enumerate().all(|(i, &x)| i == tip || x > 0.03));
    let a = assign_points(&PointCloud::new(vec![q]), &hulls);
    assert_eq!(a[0].body, tip);
    assert!((a[0].distance - 0.01).abs() < 1e-9);
}

#[test]
fn ties_go_to_the_lower_index_and_inside_is_zero() {
    let c = cube(0.01);
    let hulls = [(&c, at(0.03, 0.0, 0.5)), (&c, at(-0.03, 0.0, 0.5))];
    let a = assign_points(&PointCloud::new(vec![Vec3::new(0.0, 0.0, 0.5)]), &hulls);
    assert_eq!(a[0].body, 0);
    let b = assign_points(&PointCloud::new(vec![Vec3::new(-0.031, 0.002, 0.5)]), &hulls);
    assert_eq!((b[0].body, b[0].distance), (1, 0.0));
    assert!(assign_points(&PointCloud::new(vec![Vec3::z()]), &[]).is_empty());
}

#[test]
fn attachment_follows_the_face_normal() {
    let c = cube(0.01);
    // The -z face of a cube ahead of the camera faces the camera.
    let hulls = [(&c, at(0.0, 0.0, 0.5))];
    let q = Vec3::new(0.002, -0.003, 0.49 - 0.004);
    let a = assign_points(&PointCloud::new(vec![q]), &hulls);
    assert!((a[0].normal + Vec3::z()).norm() < 1e-12);
    assert!((a[0].distance - 0.004).abs() < 1e-12);
    let cons = make_surface_constraints(&a, 0.1);
    let Constraint::SurfaceAttachment { direction, cap, .. } = &cons[0] else { panic!() };
    assert!((direction + Vec3::z()).norm() < 1e-12);
    assert_eq!(*cap, 0.1);

    // Dyadic coordinates keep the point exactly on the face.
    let c = cube(1.0 / 128.0);
    let hulls = [(&c, at(0.0, 0.0, 0.5))];
    let on = Vec3::new(1.0 / 512.0, -1.0 / 256.0, 0.5 - 1.0 / 128.0);
    let a = assign_points(&PointCloud::new(vec![on]), &hulls);
    assert_eq!(a[0].distance, 0.0);
    let cons = make_surface_constraints(&a, 0.1);
    let Constraint::SurfaceAttachment { direction, .. } = &cons[0] else { panic!() };
    assert!((direction - a[0].normal).norm() < 1e-12);
    let bodies = BodySet::new(vec![RigidBody::new(Arc::new(c.clone()), 1.0, at(0.0, 0.0, 0.5)).unwrap()]);
    let rows = lower_constraints(&cons, &bodies, &SolverConfig::default()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].bias.abs() < 1e-12);
    assert_eq!((rows[0].lower, rows[0].upper), (-0.1, 0.1));
}

#[test]
fn back_faces_are_not_attachment_targets() {
    let c = cube(0.01);
    let hulls = [(&c, at(0.0, 0.0, 0.5))];
    // Just behind the far face: nearest face overall is the back one.
    let q = Vec3::new(0.0, 0.0, 0.512);
    let a = assign_points(&PointCloud::new(vec![q]), &hulls);
    assert!((a[0].distance - 0.002).abs() < 1e-12);
    assert!(a[0].normal.dot(&a[0].surface_point) < 0.0);
}

#[test]
fn boundary_constraints_only_for_straddling_bodies() {
    let c = cube(0.01);
    let planes = BoundaryPlaneSet {
        planes: vec![Plane { normal: Vec3::x(), offset: -0.05 }, Plane { normal: -Vec3::x(), offset: -0.05 }],
    };
    let inside = [(&c, at(0.0, 0.0, 0.5)), (&c, at(0.02, 0.0, 0.5))];
    assert!(make_boundary_constraints(&planes, &inside, 0.0).is_empty());
    let straddle = [(&c, at(0.0, 0.0, 0.5)), (&c, at(0.055, 0.0, 0.5))];
    let cons = make_boundary_constraints(&planes, &straddle, 0.001);
    assert_eq!(cons.len(), 1);
    let Constraint::ContactPlane { body, normal, offset } = cons[0] else { panic!() };
    assert_eq!(body, 1);
    assert_eq!(normal, -Vec3::x());
    assert!((offset + 0.051).abs() < 1e-12);
    // Within tolerance: no constraint.
    let barely = [(&c, at(0.0405, 0.0, 0.5))];
    assert!(make_boundary_constraints(&planes, &barely, 0.001).is_empty());

    let mut body = RigidBody::new(Arc::new(c.clone()), 1.0, at(0.055, 0.0, 0.5)).unwrap();
    body.linear_velocity = Vec3::new(1.0, 0.0, 0.0);
    let anchor = RigidBody::new(Arc::new(c.clone()), 1.0, at(0.0, 0.0, 0.5)).unwrap();
    let mut set = BodySet::new(vec![anchor, body]);
    let cfg = SolverConfig { damping: 0.0, ..Default::default() };
    let before = set.bodies()[1].pose;
    step_world(&mut set, &[cons[0].clone()], &cfg).unwrap();
    let b = &set.bodies()[1];
    assert!(b.pose.translation.x < before.translation.x);
    for v in c.vertices() {
        let p = transform_point(&before, v);
        if -p.x < -0.051 {
            assert!(-b.velocity_at(&transform_point(&b.pose, v)).x >= -1e-9);
        }
    }
}

#[test]
fn labels_override_nearest_body() {
    let (m, poses) = hand_scene();
    let hulls: Vec<PosedHull> = m.bodies.iter().zip(&poses).map(|(b, p)| (b.shape.as_ref(), *p)).collect();
    let thumb = m.fingertips()[0].unwrap();
    let index = m.fingertips()[1].unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pts: Vec<Vec3> = (0..10)
        .map(|_| Vec3::new(rng.gen_range(-0.02..0.22), rng.gen_range(-0.06..0.06), rng.gen_range(0.45..0.55)))
        .collect();
    pts[7] = m.tip_point(0, &poses).unwrap() + Vec3::new(0.003, 0.0, 0.0);
    let cloud = PointCloud::new(pts);
    let d = brute_distances(&cloud.points[7], &hulls);
    assert!(d[thumb] < d[index]);
    let labels = [FeatureLabel { point: 7, allowed: vec![index] }];
    let a = assign_labeled(&labels, &cloud, &hulls).unwrap();
    assert_eq!(a[0].body, index);
    let cons = bind_known_features(&labels, &cloud, &hulls, 0.01).unwrap();
    let Constraint::SurfaceAttachment { body, cap, .. } = cons[0] else { panic!() };
    assert_eq!((body, cap), (index, 0.04));

    let all: Vec<FeatureLabel> = (0..cloud.len()).map(|k| FeatureLabel { point: k, allowed: (0..hulls.len()).collect() }).collect();
    assert_eq!(assign_labeled(&all, &cloud, &hulls).unwrap(), assign_points(&cloud, &hulls));

    let tips: Vec<usize> = m.fingertips().iter().map(|t| t.unwrap()).collect();
    let palm_point = transform_point(&poses[m.palm()], &m.bodies[m.palm()].shape.centroid()) + Vec3::new(0.0, 0.0, -0.02);
    let cloud = PointCloud::new(vec![palm_point]);
    assert_eq!(assign_points(&cloud, &hulls)[0].body, m.palm());
    let a = assign_labeled(&[FeatureLabel { point: 0, allowed: tips.clone() }], &cloud, &hulls).unwrap();
    let d = brute_distances(&palm_point, &hulls);
    let expect = *tips.iter().min_by(|&&a, &&b| d[a].total_cmp(&d[b]).then(a.cmp(&b))).unwrap();
    assert_eq!(a[0].body, expect);
}

#[test]
fn bad_labels_are_errors() {
    let c = cube(0.01);
    let hulls = [(&c, at(0.0, 0.0, 0.5))];
    let cloud = PointCloud::new(vec![Vec3::z()]);
    let err = |l: FeatureLabel| bind_known_features(&[l], &cloud, &hulls, 1.0).unwrap_err();
    assert!(matches!(err(FeatureLabel { point: 3, allowed: vec![0] }), BindingError::PointOutOfRange { .. }));
    assert!(matches!(err(FeatureLabel { point: 0, allowed: vec![] }), BindingError::EmptyLabel { .. }));
    assert!(matches!(err(FeatureLabel { point: 0, allowed: vec![4] }), BindingError::UnknownBody { .. }));
}

#[test]
fn surface_impulses_stay_within_caps() {
    let (m, poses) = hand_scene();
    let mut world = m.build_bodies(&poses).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cloud = PointCloud::new(
        (0..300)
            .map(|_| Vec3::new(rng.gen_range(-0.02..0.22), rng.gen_range(-0.06..0.06), rng.gen_range(0.45..0.55)))
            .collect(),
    );
    let cap = surface_cap(m.total_mass(), cloud.len(), DEFAULT_MAX_SPEED);
    let mut cons = m.structural_constraints();
    cons.extend(make_surface_constraints(&assign_points(&cloud, &posed_hulls(&world)), cap));
    let stats = step_world(&mut world, &cons, &SolverConfig::default()).unwrap();
    assert_eq!(stats.surface_rows, 300);
    assert!(stats.surface_impulse <= 300.0 * cap + 1e-12);
    assert!(stats.surface_impulse > 0.0);
}

#[test]
fn registration_recovers_small_displacements() {
    for seed in 0..5 {
        let out = run_registration(&RegistrationConfig { seed, ..Default::default() });
        let k = out.frames_to_converge(1e-3, 1f64.to_radians());
        assert!(k.is_some_and(|k| k <= 30), "seed {seed}: {k:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assignment_is_the_global_minimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes: Vec<ConvexPolyhedron> = (0..3)
            .map(|_| {
                let pts: Vec<Vec3> = (0..10)
                    .map(|_| Vec3::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02)))
                    .collect();
                ConvexPolyhedron::from_points(&pts).unwrap()
            })
            .collect();
        let hulls: Vec<PosedHull> = shapes
            .iter()
            .map(|s| {
                let t = Vec3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(0.4..0.5));
                (s, pose(t, UnitQuaternion::from_scaled_axis(Vec3::new(rng.gen(), rng.gen(), rng.gen()))))
            })
            .collect();
        let cloud = PointCloud::new(
            (0..40)
                .map(|_| Vec3::new(rng.gen_range(-0.08..0.08), rng.gen_range(-0.08..0.08), rng.gen_range(0.37..0.53)))
                .collect(),
        );
        let a = assign_points(&cloud, &hulls);
        prop_assert_eq!(a.len(), cloud.len());
        for (k, asg) in a.iter().enumerate() {
            prop_assert_eq!(asg.point, k);
            let d = brute_distances(&cloud.points[k], &hulls);
            let best = d.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!((asg.distance - best).abs() < 1e-12);
            prop_assert!(d[..asg.body].iter().all(|&x| x > best));
            prop_assert!(asg.distance >= 0.0);
            if asg.distance > 0.0 && asg.normal.dot(&asg.surface_point) < 0.0 {
                // Outside and attached to the nearest camera-facing face.
                prop_assert!((asg.target - asg.surface_point).norm() >= asg.distance - 1e-12);
            }
        }
    }
}
