use std::sync::Arc;

use phystrack::binding::{posed_hulls, PosedHull};
use phystrack::geometry::*;
use phystrack::hypotheses::*;
use phystrack::model::{default_hand, palm_facing_root, ArticulatedModel, HandPose};
use phystrack::sensor::{
    boundary_planes, deproject, five_finger_detector, render_depth, voxel_subsample, CameraIntrinsics, DepthImage,
    PointCloud,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CENTER: [f64; 3] = [0.0, 0.0, 0.45];

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

fn render(m: &ArticulatedModel, poses: &[RigidPose]) -> DepthImage {
    let scene: Vec<_> = m.bodies.iter().zip(poses).map(|(b, p)| (b.shape.as_ref(), *p)).collect();
    render_depth(&scene, &CameraIntrinsics::default())
}

fn open_pose(m: &ArticulatedModel) -> HandPose {
    HandPose::open(m, palm_facing_root(Vec3::from(CENTER)))
}

fn shifted(start: &HandPose, d: Vec3) -> HandPose {
    let mut p = start.clone();
    p.root = pose(d + p.root.translation.vector, p.root.rotation);
    p
}

fn max_body_gap(a: &[RigidPose], b: &[RigidPose]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p.translation.vector - q.translation.vector).norm()).fold(0.0, f64::max)
}

struct Frame {
    image: DepthImage,
    cloud: PointCloud,
    planes: phystrack::sensor::BoundaryPlaneSet,
}

impl Frame {
    fn of(m: &ArticulatedModel, poses: &[RigidPose], cfg: &TrackerConfig) -> Frame {
        let image = render(m, poses);
        let full = deproject(&image);
        let planes = boundary_planes(&full, cfg.near_margin);
        Frame { cloud: voxel_subsample(&full, cfg.voxel_size), image, planes }
    }

    fn input(&self) -> FrameInput<'_> {
        FrameInput { cloud: &self.cloud, planes: &self.planes, image: &self.image, tips: None }
    }
}

fn env(m: &ArticulatedModel, cfg: &TrackerConfig) -> HandEnv {
    HandEnv::new(Arc::new(m.clone()), cfg).unwrap()
}

#[test]
fn translated_cube_fit_is_the_farthest_corner() {
    let c = cube(0.5);
    let corners = PointCloud::new(c.vertices().to_vec());
    let img = DepthImage::blank(CameraIntrinsics::default());
    let moved = pose(Vec3::new(2.0, 0.0, 0.0), UnitQuaternion::identity());
    let r = evaluate_error(&[(&c, moved)], &corners, &img, DEFAULT_OCCLUSION_MARGIN);
    assert!((r.fit[0] - 2.0).abs() < 1e-12, "{:?}", r.fit);
    assert_eq!(r.points, vec![8]);
}

#[test]
fn floating_body_pays_its_inscribed_radius() {
    let c = cube(0.02);
    let img = DepthImage::blank(CameraIntrinsics::default());
    let at = pose(Vec3::new(0.0, 0.0, 0.5), UnitQuaternion::identity());
    let r = evaluate_error(&[(&c, at)], &PointCloud::default(), &img, DEFAULT_OCCLUSION_MARGIN);
    assert_eq!(r.fit, vec![0.0]);
    assert_eq!(r.occlusion, vec![c.inscribed_radius()]);
    assert!((r.occlusion[0] - 0.02).abs() < 1e-9);
    assert_eq!(r.total, r.fit_sum() + r.occlusion_sum());

    // Off-image and behind-the-camera centroids count as background too.
    let off = pose(Vec3::new(5.0, 0.0, 0.5), UnitQuaternion::identity());
    let behind = pose(Vec3::new(0.0, 0.0, -0.5), UnitQuaternion::identity());
    for p in [off, behind] {
        let r = evaluate_error(&[(&c, p)], &PointCloud::default(), &img, DEFAULT_OCCLUSION_MARGIN);
        assert_eq!(r.occlusion[0], c.inscribed_radius());
    }
}

#[test]
fn own_render_scores_near_zero() {
    let m = default_hand();
    let poses = open_pose(&m).body_poses(&m);
    let img = render(&m, &poses);
    let cloud = deproject(&img);
    let world = m.build_bodies(&poses).unwrap();
    let r = evaluate_error(&posed_hulls(&world), &cloud, &img, DEFAULT_OCCLUSION_MARGIN);
    for b in 0..m.bodies.len() {
        if r.points[b] > 0 {
            assert!(r.fit[b] <= 1e-3, "body {b} fit {}", r.fit[b]);
        }
        assert_eq!(r.occlusion[b], 0.0, "body {b}");
    }
    assert_eq!(r.points.iter().sum::<usize>(), cloud.len());
    assert_eq!(r.total, r.fit_sum() + r.occlusion_sum());
}

#[test]
fn displaced_bodies_score_worse_than_the_truth() {
    let m = default_hand();
    let poses = open_pose(&m).body_poses(&m);
    let img = render(&m, &poses);
    let cloud = deproject(&img);
    let truth = evaluate_error(&posed_hulls(&m.build_bodies(&poses).unwrap()), &cloud, &img, DEFAULT_OCCLUSION_MARGIN);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let b = rng.gen_range(0..m.bodies.len());
        let dir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        let mut moved = poses.clone();
        moved[b] = pose(moved[b].translation.vector + dir * rng.gen_range(0.005..0.02), moved[b].rotation);
        let scene: Vec<PosedHull> = m.bodies.iter().zip(&moved).map(|(h, p)| (h.shape.as_ref(), *p)).collect();
        let r = evaluate_error(&scene, &cloud, &img, DEFAULT_OCCLUSION_MARGIN);
        assert!(truth.total <= r.total, "body {b}: truth {} displaced {}", truth.total, r.total);
    }
}

#[test]
fn flip_schedule_arithmetic() {
    assert_eq!(flip_period(60.0), 30);
    assert_eq!(flip_period(30.0), 15);
    assert_eq!(flip_period(1.0), 1);
    let mut s = FlipSchedule::default();
    for _ in 0..29 {
        s.advance(30);
    }
    assert_eq!(s.cycle, 0);
    s.advance(30);
    assert_eq!(s.cycle, 1);
    assert_eq!(s.frames_since, 0);

    let at = |cycle| FlipSchedule { cycle, frames_since: 0 }.fingers();
    assert_eq!(at(0), (1, Some(2)));
    assert_eq!(at(1), (1, None));
    assert_eq!(at(2), (2, Some(3)));
    assert_eq!(at(6), (4, Some(3)));
    assert_eq!(at(8), (0, Some(1)));
    assert_eq!(at(10), at(0));
}

#[test]
fn clusters_split_far_blobs_and_merge_near_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut blob = |cx: f64, n: usize| -> Vec<Vec3> {
        (0..n)
            .map(|_| Vec3::new(cx + rng.gen_range(-0.04..0.04), rng.gen_range(-0.08..0.08), 0.6 + rng.gen_range(0.0..0.03)))
            .collect()
    };
    let (left, right) = (blob(-0.2, 300), blob(0.2, 250));
    let mut all = right.clone();
    all.extend(&left);
    let merge = 1.5 * default_hand().length();
    let c = cluster_hands(&PointCloud::new(all), merge);
    assert_eq!(c.len(), 2);
    assert_eq!(c[0].hand, Handedness::Left);
    assert_eq!(c[0].cloud.points, left);
    assert_eq!(c[1].hand, Handedness::Right);
    assert_eq!(c[1].cloud.points, right);

    let mut near = blob(-0.025, 200);
    near.extend(blob(0.025, 200));
    let c = cluster_hands(&PointCloud::new(near.clone()), merge);
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].hand, Handedness::Right);
    assert_eq!(c[0].cloud.points, near);

    assert!(cluster_hands(&PointCloud::default(), merge).is_empty());
}

#[test]
fn five_strategies_give_five_reports_and_the_minimum_wins() {
    let m = default_hand();
    let truth = open_pose(&m);
    let img = render(&m, &truth.body_poses(&m));
    let mut state = TrackerState::new(m.clone(), &shifted(&truth, Vec3::new(0.004, 0.0, 0.0)), TrackerConfig::default()).unwrap();
    for _ in 0..3 {
        let r = step_tracker(&mut state, &img).unwrap();
        let hand = r.hand(Handedness::Right).unwrap();
        let kinds: Vec<StrategyKind> = hand.reports.iter().map(|(k, _)| *k).collect();
        assert_eq!(kinds, StrategyKind::ALL.to_vec());
        let best = hand.best_error().unwrap().total;
        assert!(hand.reports.iter().all(|(_, r)| best <= r.total));
        let first_min = hand.reports.iter().find(|(_, r)| r.total == best).unwrap().0;
        assert_eq!(hand.winner, first_min);
        for (_, r) in &hand.reports {
            assert_eq!(r.total, r.fit_sum() + r.occlusion_sum());
            assert_eq!(r.points.iter().sum::<usize>(), hand.points);
        }
    }
}

#[test]
fn empty_frame_keeps_the_previous_pose() {
    let m = default_hand();
    let truth = open_pose(&m);
    let mut state = TrackerState::new(m.clone(), &truth, TrackerConfig::default()).unwrap();
    let r = step_tracker(&mut state, &DepthImage::blank(CameraIntrinsics::default())).unwrap();
    let hand = &r.hands[0];
    assert!(hand.empty);
    assert!(hand.reports.is_empty());
    assert_eq!(hand.poses, truth.body_poses(&m));
}

#[test]
fn stationary_input_is_a_fixed_point() {
    let m = default_hand();
    let truth = open_pose(&m);
    let img = render(&m, &truth.body_poses(&m));
    let mut state = TrackerState::new(m.clone(), &truth, TrackerConfig::default()).unwrap();
    let mut prev = state.hand(Handedness::Right).unwrap().best_poses();
    for _ in 0..10 {
        let r = step_tracker(&mut state, &img).unwrap();
        assert!(max_body_gap(&prev, &r.hands[0].poses) < 5e-4);
        prev = r.hands[0].poses.clone();
    }
}

#[test]
fn stepping_is_deterministic() {
    let m = default_hand();
    let truth = open_pose(&m);
    let img = render(&m, &truth.body_poses(&m));
    let start = shifted(&truth, Vec3::new(0.01, -0.005, 0.0));
    let run = || {
        let mut s = TrackerState::new(m.clone(), &start, TrackerConfig::default()).unwrap();
        (0..4).map(|_| step_tracker(&mut s, &img).unwrap().hands[0].clone()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn normal_follows_a_shifted_cloud() {
    let m = default_hand();
    let cfg = TrackerConfig::default();
    let e = env(&m, &cfg);
    let start = open_pose(&m);
    let target = shifted(&start, Vec3::new(0.005, 0.0, 0.0));
    let goal = target.body_poses(&m);
    let frame = Frame::of(&m, &goal, &cfg);
    let mut world = m.build_bodies(&start.body_poses(&m)).unwrap();
    for _ in 0..5 {
        run_normal(&e, &mut world, &frame.input(), &cfg).unwrap();
    }
    let palm = m.palm();
    let err = (world.poses()[palm].translation.vector - goal[palm].translation.vector).norm();
    assert!(err < 1e-3, "palm off by {err}");
}

#[test]
fn empty_cloud_keeps_the_skeleton_together() {
    let m = default_hand();
    let cfg = TrackerConfig::default();
    let e = env(&m, &cfg);
    let poses = open_pose(&m).body_poses(&m);
    let frame = Frame { image: DepthImage::blank(CameraIntrinsics::default()), cloud: PointCloud::default(), planes: Default::default() };
    let mut world = m.build_bodies(&poses).unwrap();
    for _ in 0..10 {
        run_normal(&e, &mut world, &frame.input(), &cfg).unwrap();
    }
    let after = world.poses();
    assert!(m.anchor_drift(&after) < 1e-6);
    assert!(m.limit_excess(&after) < 1e-6);
    assert!(max_body_gap(&poses, &after) < 1e-6, "at rest with no data nothing should move");
}

#[test]
fn gross_motion_and_grasping_agree_with_normal_on_a_still_open_hand() {
    let m = default_hand();
    let cfg = TrackerConfig::default();
    let e = env(&m, &cfg);
    let poses = open_pose(&m).body_poses(&m);
    let frame = Frame::of(&m, &poses, &cfg);
    let run = |f: fn(&HandEnv, &mut phystrack::dynamics::BodySet, &FrameInput, &TrackerConfig) -> Result<RunStats, TrackerError>| {
        let mut w = m.build_bodies(&poses).unwrap();
        for _ in 0..5 {
            f(&e, &mut w, &frame.input(), &cfg).unwrap();
        }
        w.poses()
    };
    let normal = run(run_normal);
    assert!(max_body_gap(&normal, &run(run_gross_motion)) < 1e-3);
    assert!(max_body_gap(&normal, &run(run_grasping)) < 1e-3);
}

#[test]
fn gross_motion_keeps_up_with_a_three_centimetre_jump() {
    let m = default_hand();
    let cfg = TrackerConfig::default();
    let e = env(&m, &cfg);
    let start = open_pose(&m);
    let goal = shifted(&start, Vec3::new(0.03, 0.0, 0.0)).body_poses(&m);
    let frame = Frame::of(&m, &goal, &cfg);
    let before = start.body_poses(&m);
    let mut gross = m.build_bodies(&before).unwrap();
    run_gross_motion(&e, &mut gross, &frame.input(), &cfg).unwrap();
    let mut normal = m.build_bodies(&before).unwrap();
    run_normal(&e, &mut normal, &frame.input(), &cfg).unwrap();
    let err = |w: &phystrack::dynamics::BodySet| max_body_gap(&w.poses(), &goal);
    assert!(err(&gross) < err(&normal), "gross {} normal {}", err(&gross), err(&normal));
    assert!(m.anchor_drift(&gross.poses()) < 1e-6);
}

#[test]
fn feature_seeded_without_detection_is_normal() {
    let m = default_hand();
    let cfg = TrackerConfig::default();
    let e = env(&m, &cfg);
    let start = open_pose(&m);
    let goal = shifted(&start, Vec3::new(0.006, 0.004, 0.0)).body_poses(&m);
    let frame = Frame::of(&m, &goal, &cfg);
    let mut a = m.build_bodies(&start.body_poses(&m)).unwrap();
    let mut b = a.clone();
    for _ in 0..3 {
        run_normal(&e, &mut a, &frame.input(), &cfg).unwrap();
        run_feature_seeded(&e, &mut b, &frame.input(), &cfg).unwrap();
    }
    assert_eq!(a.poses(), b.poses());
}

#[test]
fn grasping_loses_on_a_pointing_hand() {
    let m = default_hand();
    let truth = HandPose::extended(&m, palm_facing_root(Vec3::from(CENTER)), &[1]);
    let img = render(&m, &truth.body_poses(&m));
    let cfg = TrackerConfig { strategies: vec![StrategyKind::Normal, StrategyKind::Grasping], independent: true, ..Default::default() };
    let mut state = TrackerState::new(m.clone(), &truth, cfg).unwrap();
    let (mut normal, mut grasp) = (0.0, 0.0);
    for _ in 0..20 {
        let r = step_tracker(&mut state, &img).unwrap();
        normal += r.hands[0].reports[0].1.total;
        grasp += r.hands[0].reports[1].1.total;
    }
    assert!(grasp > normal, "grasping {grasp} normal {normal}");
}

#[test]
fn flips_are_rejected_when_the_pose_is_right() {
    let m = default_hand();
    let truth = HandPose::extended(&m, palm_facing_root(Vec3::from(CENTER)), &[1, 2]);
    let img = render(&m, &truth.body_poses(&m));
    let mut state = TrackerState::new(m.clone(), &truth, TrackerConfig::default()).unwrap();
    for _ in 0..150 {
        let r = step_tracker(&mut state, &img).unwrap();
        let h = &r.hands[0];
        let flip = h.reports.iter().find(|(k, _)| *k == StrategyKind::FingerFlip).unwrap().1.total;
        assert!(flip > h.best_error().unwrap().total, "frame {}", r.frame);
        assert_ne!(h.winner, StrategyKind::FingerFlip);
    }
}

#[test]
fn detector_reset_beats_a_corrupted_incumbent() {
    let m = default_hand();
    let truth = open_pose(&m);
    let img = render(&m, &truth.body_poses(&m));
    assert!(five_finger_detector(&img, &TrackerConfig::default().detector).is_some());
    let wrong = HandPose::fist(&m, palm_facing_root(Vec3::new(0.015, -0.01, 0.46)));
    let mut state = TrackerState::new(m.clone(), &wrong, TrackerConfig::default()).unwrap();
    let r = step_tracker(&mut state, &img).unwrap();
    let h = &r.hands[0];
    let seeded = h.reports.iter().find(|(k, _)| *k == StrategyKind::FeatureSeeded).unwrap().1.total;
    let normal = h.reports[0].1.total;
    assert!(seeded < normal, "seeded {seeded} normal {normal}");
    let mut winners = vec![h.winner];
    for _ in 0..4 {
        winners.push(step_tracker(&mut state, &img).unwrap().hands[0].winner);
    }
    assert!(winners.contains(&StrategyKind::FeatureSeeded), "{winners:?}");
}

#[test]
fn detection_on_a_comb_is_rejected() {
    // Five prongs on a bar above a closed hand fire the detector, but
    // pulling the fingertips onto them costs more than it gains.
    let m = default_hand();
    let truth = HandPose::fist(&m, palm_facing_root(Vec3::from(CENTER)));
    let poses = truth.body_poses(&m);
    let prong = ConvexPolyhedron::from_points(&[
        Vec3::new(-0.004, -0.03, -0.004),
        Vec3::new(0.004, -0.03, -0.004),
        Vec3::new(-0.004, 0.03, -0.004),
        Vec3::new(0.004, 0.03, -0.004),
        Vec3::new(-0.004, -0.03, 0.004),
        Vec3::new(0.004, -0.03, 0.004),
        Vec3::new(-0.004, 0.03, 0.004),
        Vec3::new(0.004, 0.03, 0.004),
    ])
    .unwrap();
    let bar = ConvexPolyhedron::from_points(&cube(1.0).vertices().iter().map(|v| v.component_mul(&Vec3::new(0.05, 0.01, 0.005))).collect::<Vec<_>>()).unwrap();
    let mut scene: Vec<(&ConvexPolyhedron, RigidPose)> = m.bodies.iter().zip(&poses).map(|(b, p)| (b.shape.as_ref(), *p)).collect();
    let top = -0.16;
    for k in 0..5 {
        scene.push((&prong, pose(Vec3::new(-0.04 + 0.02 * k as f64, top, 0.44), UnitQuaternion::identity())));
    }
    scene.push((&bar, pose(Vec3::new(0.0, top + 0.035, 0.44), UnitQuaternion::identity())));
    let img = render_depth(&scene, &CameraIntrinsics::default());
    assert!(five_finger_detector(&img, &TrackerConfig::default().detector).is_some(), "comb should fire the detector");
    let mut state = TrackerState::new(m.clone(), &truth, TrackerConfig::default()).unwrap();
    for _ in 0..5 {
        let r = step_tracker(&mut state, &img).unwrap();
        assert_ne!(r.hands[0].winner, StrategyKind::FeatureSeeded);
    }
}

#[test]
fn duplicate_hands_and_bad_configs_are_rejected() {
    let m = default_hand();
    let p = open_pose(&m);
    let two = vec![(Handedness::Right, m.clone(), p.clone()), (Handedness::Right, m.clone(), p.clone())];
    assert!(matches!(TrackerState::with_hands(TrackerConfig::default(), two), Err(TrackerError::Config(_))));
    assert!(TrackerState::with_hands(TrackerConfig::default(), Vec::new()).is_err());
    let none = TrackerConfig { strategies: Vec::new(), ..Default::default() };
    assert!(matches!(TrackerState::new(m.clone(), &p, none), Err(TrackerError::Config(_))));
    let voxel = TrackerConfig { voxel_size: 0.0, ..Default::default() };
    assert!(TrackerState::new(m.clone(), &p, voxel).is_err());
}
