//! Per-frame multi-hypothesis tracking.
//!
//! Every frame each enabled strategy advances its own copy of the hand
//! world against the same cloud. The poses are scored with the fit and
//! occlusion metric in [`evaluate_error`] and the lowest total wins; losing
//! worlds restart from the winner next frame unless hypotheses run
//! independently.

mod cluster;
mod error;

use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{cluster_hands, HandCluster, Handedness, KMEANS_ITERATIONS};
pub use error::{evaluate_error, occludes_background, ErrorReport, DEFAULT_OCCLUSION_MARGIN};

use crate::binding::{
    assign_points, bind_known_features, make_boundary_constraints, make_surface_constraints, posed_hulls, surface_cap,
    FeatureLabel, DEFAULT_MAX_SPEED,
};
use crate::dynamics::{step_world_split, BodySet, Constraint, DynamicsError, JointAngles, SolverConfig};
use crate::geometry::{transform_point, RigidPose, Vec3};
use crate::model::{fist_flexion, ArticulatedModel, HandPose};
use crate::sensor::{
    boundary_planes, deproject, five_finger_detector, voxel_subsample, BoundaryPlaneSet, DepthImage, DetectorConfig,
    PointCloud,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Normal,
    GrossMotion,
    Grasping,
    FingerFlip,
    FeatureSeeded,
}

impl StrategyKind {
    /// All strategies in tie-break order.
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Normal,
        StrategyKind::GrossMotion,
        StrategyKind::Grasping,
        StrategyKind::FingerFlip,
        StrategyKind::FeatureSeeded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Normal => "normal",
            StrategyKind::GrossMotion => "gross-motion",
            StrategyKind::Grasping => "grasping",
            StrategyKind::FingerFlip => "finger-flip",
            StrategyKind::FeatureSeeded => "feature-seeded",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy '{s}' (expected one of normal, gross-motion, grasping, finger-flip, feature-seeded)"))
    }
}

/// Finger order visited by the flip schedule (0 = thumb).
pub const FLIP_ORDER: [usize; 5] = [1, 2, 3, 4, 0];

/// Frames between flip schedule advances.
pub fn flip_period(frame_rate: f64) -> usize {
    ((0.5 * frame_rate).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FlipSchedule {
    /// Completed schedule advances.
    pub cycle: usize,
    pub frames_since: usize,
}

impl FlipSchedule {
    /// Finger to flip this cycle, plus its neighbor on even cycles. Each
    /// finger holds for two cycles, first with its neighbor, then alone.
    pub fn fingers(&self) -> (usize, Option<usize>) {
        let f = FLIP_ORDER[(self.cycle / 2) % FLIP_ORDER.len()];
        let neighbor = if f == 4 { 3 } else { f + 1 };
        (f, (self.cycle % 2 == 0).then_some(neighbor))
    }

    pub fn advance(&mut self, period: usize) {
        self.frames_since += 1;
        if self.frames_since >= period {
            self.cycle += 1;
            self.frames_since = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Normal,
    GrossMotion,
    Grasping,
    FingerFlip(FlipSchedule),
    FeatureSeeded,
}

impl Strategy {
    pub fn new(kind: StrategyKind) -> Self {
        match kind {
            StrategyKind::Normal => Strategy::Normal,
            StrategyKind::GrossMotion => Strategy::GrossMotion,
            StrategyKind::Grasping => Strategy::Grasping,
            StrategyKind::FingerFlip => Strategy::FingerFlip(FlipSchedule::default()),
            StrategyKind::FeatureSeeded => Strategy::FeatureSeeded,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Normal => StrategyKind::Normal,
            Strategy::GrossMotion => StrategyKind::GrossMotion,
            Strategy::Grasping => StrategyKind::Grasping,
            Strategy::FingerFlip(_) => StrategyKind::FingerFlip,
            Strategy::FeatureSeeded => StrategyKind::FeatureSeeded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Input frame rate, Hz. Drives the flip schedule.
    pub frame_rate: f64,
    /// Voxel edge for cloud subsampling, m.
    pub voxel_size: f64,
    /// Speed the summed surface caps could give the whole hand, m/s.
    pub max_speed: f64,
    pub solver: SolverConfig,
    pub strategies: Vec<StrategyKind>,
    /// Keep every hypothesis on its own trajectory instead of restarting
    /// losers from the winner.
    pub independent: bool,
    pub occlusion_margin: f64,
    pub boundary: bool,
    /// Vertices may poke this far out of a boundary plane freely, m.
    pub boundary_tolerance: f64,
    /// Gap between the nearest cloud point and the near plane, m.
    pub near_margin: f64,
    pub grasp_deviation_deg: f64,
    /// A finger is extended when its tip is farther from the palm
    /// centroid than this fraction of its chain length.
    pub flip_threshold: f64,
    pub flip_substeps: usize,
    /// Angular impulse cap of flip nudges, N m s.
    pub flip_nudge_cap: f64,
    /// Clusters closer than this multiple of the model length merge.
    pub merge_factor: f64,
    pub detector: DetectorConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            frame_rate: 60.0,
            voxel_size: 0.0075,
            max_speed: DEFAULT_MAX_SPEED,
            solver: SolverConfig::default(),
            strategies: StrategyKind::ALL.to_vec(),
            independent: false,
            occlusion_margin: DEFAULT_OCCLUSION_MARGIN,
            boundary: true,
            boundary_tolerance: 0.01,
            near_margin: 0.01,
            grasp_deviation_deg: 10.0,
            flip_threshold: 0.7,
            flip_substeps: 4,
            flip_nudge_cap: 0.002,
            merge_factor: 1.5,
            detector: DetectorConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |m: &str| Err(TrackerError::Config(m.into()));
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return bad("frame_rate must be positive");
        }
        if !(self.voxel_size.is_finite() && self.voxel_size > 0.0) {
            return bad("voxel_size must be positive");
        }
        if !(self.max_speed.is_finite() && self.max_speed >= 0.0) {
            return bad("max_speed must be non-negative");
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy must be enabled");
        }
        for (name, v) in [
            ("occlusion_margin", self.occlusion_margin),
            ("boundary_tolerance", self.boundary_tolerance),
            ("near_margin", self.near_margin),
            ("grasp_deviation_deg", self.grasp_deviation_deg),
            ("flip_threshold", self.flip_threshold),
            ("flip_nudge_cap", self.flip_nudge_cap),
            ("merge_factor", self.merge_factor),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TrackerError::Config(format!("{name} must be a non-negative number")));
            }
        }
        self.solver.validate().map_err(|e| TrackerError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("invalid tracker configuration: {0}")]
    Config(String),
    #[error("model lacks tag '{0}' required by an enabled strategy")]
    MissingTag(String),
    #[error("initial pose has {got} joint angles, model has {expected} joints")]
    PoseMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Immutable per-hand data shared by all hypotheses.
#[derive(Debug)]
pub struct HandEnv {
    pub model: Arc<ArticulatedModel>,
    pub structural: Vec<Constraint>,
    /// Structural constraints plus the knuckle-group alignment.
    pub grasp: Vec<Constraint>,
    /// Rest-pose distance from each finger's base joint to its tip.
    pub chain_length: [f64; 5],
    pub total_mass: f64,
}

impl HandEnv {
    pub fn new(model: Arc<ArticulatedModel>, config: &TrackerConfig) -> Result<Self, TrackerError> {
        let structural = model.structural_constraints();
        let mut grasp = structural.clone();
        if config.strategies.contains(&StrategyKind::Grasping) {
            for tag in ["knuckle_group_tip", "knuckle_group_mid"] {
                let group = model.tag(tag).ok_or_else(|| TrackerError::MissingTag(tag.into()))?;
                for w in group.windows(2) {
                    grasp.push(Constraint::OrientationParallel {
                        a: w[0],
                        b: w[1],
                        axis: Vec3::x(),
                        max_deviation: config.grasp_deviation_deg.to_radians(),
                    });
                }
            }
        }
        let rest = model.rest_poses(&RigidPose::identity());
        let mut chain_length = [0.0; 5];
        for (f, len) in chain_length.iter_mut().enumerate() {
            if let (Some(chain), Some(tip)) = (model.finger_chain(f), model.tip_point(f, &rest)) {
                if let Some(j) = model.joint_of_child(chain[0]) {
                    *len = (tip - model.joint_center(j)).norm();
                }
            }
        }
        let total_mass = model.total_mass();
        Ok(Self { model, structural, grasp, chain_length, total_mass })
    }

    /// Extended/curled state of a finger in the given pose.
    pub fn is_extended(&self, finger: usize, poses: &[RigidPose], threshold: f64) -> Option<bool> {
        let palm = self.model.palm();
        let c = transform_point(&poses[palm], &self.model.bodies[palm].shape.centroid());
        let tip = self.model.tip_point(finger, poses)?;
        Some((tip - c).norm() > threshold * self.chain_length[finger])
    }

    /// Orientation nudges driving `fingers` to the opposite of their
    /// current extended/curled state, at rest abduction and twist.
    pub fn flip_nudges(&self, fingers: &[usize], poses: &[RigidPose], threshold: f64, cap: f64) -> Vec<Constraint> {
        let m = &self.model;
        let mut out = Vec::new();
        for &f in fingers {
            let (Some(chain), Some(extended)) = (m.finger_chain(f), self.is_extended(f, poses, threshold)) else {
                continue;
            };
            let target = if extended { fist_flexion(f) } else { [0.0; 3] };
            let Some(first) = m.joint_of_child(chain[0]) else { continue };
            let mut parent = poses[m.joints[first].parent];
            for (k, &body) in chain.iter().enumerate() {
                let Some(ji) = m.joint_of_child(body) else { break };
                let j = &m.joints[ji];
                let a = JointAngles { twist: 0.0, swing_y: 0.0, swing_z: target[k].to_radians() };
                let rot = parent.rotation * j.parent_frame * a.to_rotation();
                let center = transform_point(&parent, &j.parent_anchor);
                parent = RigidPose::from_parts((center - rot * j.child_anchor).into(), rot);
                out.push(Constraint::PoseNudge { body, target: rot, cap });
            }
        }
        out
    }

    /// Labels for five detected tips stored left to right from point
    /// `base`. The thumb side is read off the current pose: whichever of
    /// thumb and pinky tip projects further left takes the leftmost tip.
    pub fn tip_labels(&self, poses: &[RigidPose], base: usize) -> Vec<FeatureLabel> {
        let m = &self.model;
        let ratio = |p: Vec3| p.x / p.z.max(1e-9);
        let thumb_right = match (m.tip_point(0, poses), m.tip_point(4, poses)) {
            (Some(t), Some(p)) => ratio(t) > ratio(p),
            _ => false,
        };
        let tip_bodies = m.fingertips();
        (0..5)
            .filter_map(|k| {
                let finger = if thumb_right { 4 - k } else { k };
                let body = tip_bodies[finger]?;
                Some(FeatureLabel { point: base + k, allowed: vec![body] })
            })
            .collect()
    }
}

/// One heuristic simulation and its latest score.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub strategy: Strategy,
    pub world: BodySet,
    pub last_error: Option<ErrorReport>,
}

/// Frame data shared by all hypotheses of one hand.
#[derive(Debug, Clone, Copy)]
pub struct FrameInput<'a> {
    pub cloud: &'a PointCloud,
    pub planes: &'a BoundaryPlaneSet,
    pub image: &'a DepthImage,
    /// Fingertips from the five-finger detector, left to right.
    pub tips: Option<&'a [Vec3; 5]>,
}

/// Counters and timings from running one hypothesis.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunStats {
    pub rows: usize,
    pub constraints: usize,
    pub bind: Duration,
    pub solve: Duration,
}

impl RunStats {
    fn add(&mut self, o: RunStats) {
        self.rows += o.rows;
        self.constraints += o.constraints;
        self.bind += o.bind;
        self.solve += o.solve;
    }
}

/// Assign, constrain and step once. `features` adds labeled points with
/// the raised cap.
fn data_cycle(
    env: &HandEnv,
    world: &mut BodySet,
    persistent: &[Constraint],
    input: &FrameInput,
    cfg: &TrackerConfig,
    features: Option<(&[FeatureLabel], &PointCloud)>,
) -> Result<RunStats, TrackerError> {
    let t0 = Instant::now();
    let hulls = posed_hulls(world);
    let assignments = assign_points(input.cloud, &hulls);
    let cap = surface_cap(env.total_mass, assignments.len().max(1), cfg.max_speed);
    let mut transient = make_surface_constraints(&assignments, cap);
    if cfg.boundary {
        transient.extend(make_boundary_constraints(input.planes, &hulls, cfg.boundary_tolerance));
    }
    if let Some((labels, cloud)) = features {
        transient.extend(bind_known_features(labels, cloud, &hulls, cap).expect("labels built from the tip cloud"));
    }
    drop(hulls);
    let t1 = Instant::now();
    let stats = step_world_split(world, persistent, &transient, &cfg.solver)?;
    Ok(RunStats { rows: stats.rows, constraints: transient.len(), bind: t1 - t0, solve: t1.elapsed() })
}

pub fn run_normal(env: &HandEnv, world: &mut BodySet, input: &FrameInput, cfg: &TrackerConfig) -> Result<RunStats, TrackerError> {
    data_cycle(env, world, &env.structural, input, cfg, None)
}

/// Moves the hand as one rigid body first, then releases it and runs a
/// normal cycle against a fresh assignment.
pub fn run_gross_motion(env: &HandEnv, world: &mut BodySet, input: &FrameInput, cfg: &TrackerConfig) -> Result<RunStats, TrackerError> {
    let all: Vec<usize> = (0..world.len()).collect();
    world.freeze(&all);
    let first = data_cycle(env, world, &env.structural, input, cfg, None);
    world.unfreeze();
    let mut stats = first?;
    stats.add(run_normal(env, world, input, cfg)?);
    Ok(stats)
}

pub fn run_grasping(env: &HandEnv, world: &mut BodySet, input: &FrameInput, cfg: &TrackerConfig) -> Result<RunStats, TrackerError> {
    data_cycle(env, world, &env.grasp, input, cfg, None)
}

/// Restarts from `best`, drives the scheduled fingers to their opposite
/// pose with capped nudges, then runs a normal cycle.
pub fn run_finger_flip(
    env: &HandEnv,
    world: &mut BodySet,
    input: &FrameInput,
    cfg: &TrackerConfig,
    best: &BodySet,
    schedule: &FlipSchedule,
) -> Result<RunStats, TrackerError> {
    *world = best.clone();
    let (f, neighbor) = schedule.fingers();
    let fingers: Vec<usize> = std::iter::once(f).chain(neighbor).collect();
    let nudges = env.flip_nudges(&fingers, &world.poses(), cfg.flip_threshold, cfg.flip_nudge_cap);
    let mut stats = RunStats::default();
    let t0 = Instant::now();
    for _ in 0..cfg.flip_substeps {
        let s = step_world_split(world, &env.structural, &nudges, &cfg.solver)?;
        stats.rows += s.rows;
    }
    stats.constraints += nudges.len();
    stats.solve += t0.elapsed();
    stats.add(run_normal(env, world, input, cfg)?);
    Ok(stats)
}

/// With a detection, binds each detected tip to its fingertip body before
/// the normal cycle; without one, identical to [`run_normal`].
pub fn run_feature_seeded(env: &HandEnv, world: &mut BodySet, input: &FrameInput, cfg: &TrackerConfig) -> Result<RunStats, TrackerError> {
    let Some(tips) = input.tips else {
        return run_normal(env, world, input, cfg);
    };
    let labels = env.tip_labels(&world.poses(), 0);
    let tip_cloud = PointCloud::new(tips.to_vec());
    data_cycle(env, world, &env.structural, input, cfg, Some((&labels, &tip_cloud)))
}

/// Wall-clock time per pipeline stage, seconds, summed over hands and
/// hypotheses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub subsample: f64,
    pub bind: f64,
    pub solve: f64,
    pub evaluate: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.subsample + self.bind + self.solve + self.evaluate
    }
}

/// Tracks one hand.
#[derive(Debug)]
pub struct HandTracker {
    pub hand: Handedness,
    env: HandEnv,
    hypotheses: Vec<Hypothesis>,
    best: BodySet,
    winner: StrategyKind,
}

impl HandTracker {
    pub fn new(hand: Handedness, model: Arc<ArticulatedModel>, initial: &HandPose, cfg: &TrackerConfig) -> Result<Self, TrackerError> {
        if initial.angles.len() != model.joints.len() {
            return Err(TrackerError::PoseMismatch { expected: model.joints.len(), got: initial.angles.len() });
        }
        let env = HandEnv::new(model, cfg)?;
        let best = env.model.build_bodies(&initial.body_poses(&env.model))?;
        let mut kinds = cfg.strategies.clone();
        kinds.sort();
        kinds.dedup();
        let hypotheses = kinds
            .iter()
            .map(|&k| Hypothesis { strategy: Strategy::new(k), world: best.clone(), last_error: None })
            .collect();
        Ok(Self { hand, env, hypotheses, best, winner: kinds[0] })
    }

    pub fn env(&self) -> &HandEnv {
        &self.env
    }

    pub fn model(&self) -> &ArticulatedModel {
        &self.env.model
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn best_poses(&self) -> Vec<RigidPose> {
        self.best.poses()
    }

    pub fn best_world(&self) -> &BodySet {
        &self.best
    }

    pub fn winner(&self) -> StrategyKind {
        self.winner
    }

    /// Overwrites the tracked pose of the winner and every hypothesis.
    pub fn reset(&mut self, pose: &HandPose) -> Result<(), TrackerError> {
        let poses = pose.body_poses(&self.env.model);
        self.best = self.env.model.build_bodies(&poses)?;
        for h in &mut self.hypotheses {
            h.world = self.best.clone();
            h.last_error = None;
        }
        Ok(())
    }

    fn step(&mut self, input: &FrameInput, cfg: &TrackerConfig, timings: &mut StageTimings) -> Result<HandFrame, TrackerError> {
        let Self { env, hypotheses, best, .. } = self;
        let env = &*env;
        let best_ref = &*best;
        let results: Vec<Result<(RunStats, ErrorReport, Duration), TrackerError>> = hypotheses
            .par_iter_mut()
            .map(|h| {
                let stats = match &h.strategy {
                    Strategy::Normal => run_normal(env, &mut h.world, input, cfg)?,
                    Strategy::GrossMotion => run_gross_motion(env, &mut h.world, input, cfg)?,
                    Strategy::Grasping => run_grasping(env, &mut h.world, input, cfg)?,
                    Strategy::FingerFlip(s) => run_finger_flip(env, &mut h.world, input, cfg, best_ref, s)?,
                    Strategy::FeatureSeeded => run_feature_seeded(env, &mut h.world, input, cfg)?,
                };
                let t = Instant::now();
                let report = evaluate_error(&posed_hulls(&h.world), input.cloud, input.image, cfg.occlusion_margin);
                Ok((stats, report, t.elapsed()))
            })
            .collect();
        let mut reports = Vec::with_capacity(results.len());
        let mut rows = 0;
        let mut constraints = 0;
        for (h, r) in hypotheses.iter_mut().zip(results) {
            let (stats, report, eval) = r?;
            timings.bind += stats.bind.as_secs_f64();
            timings.solve += stats.solve.as_secs_f64();
            timings.evaluate += eval.as_secs_f64();
            rows += stats.rows;
            constraints += stats.constraints;
            h.last_error = Some(report.clone());
            reports.push((h.strategy.kind(), report));
        }
        let mut win = 0;
        for (i, (_, r)) in reports.iter().enumerate() {
            if r.total < reports[win].1.total {
                win = i;
            }
        }
        *best = hypotheses[win].world.clone();
        self.winner = reports[win].0;
        if !cfg.independent {
            for (i, h) in self.hypotheses.iter_mut().enumerate() {
                if i != win {
                    h.world = self.best.clone();
                }
            }
        }
        Ok(HandFrame {
            hand: self.hand,
            poses: self.best.poses(),
            winner: self.winner,
            reports,
            empty: false,
            points: input.cloud.len(),
            rows,
            constraints,
        })
    }

    fn advance_schedule(&mut self, period: usize) {
        for h in &mut self.hypotheses {
            if let Strategy::FingerFlip(s) = &mut h.strategy {
                s.advance(period);
            }
        }
    }
}

/// Result for one hand in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HandFrame {
    pub hand: Handedness,
    pub poses: Vec<RigidPose>,
    pub winner: StrategyKind,
    /// One report per enabled strategy, in tie-break order. Empty when the
    /// hand had no points.
    pub reports: Vec<(StrategyKind, ErrorReport)>,
    /// No points reached this hand; the previous pose was kept.
    pub empty: bool,
    pub points: usize,
    /// Solver rows over all hypotheses.
    pub rows: usize,
    /// Data constraints (surface, boundary, feature, nudge) over all
    /// hypotheses.
    pub constraints: usize,
}

impl HandFrame {
    pub fn best_error(&self) -> Option<&ErrorReport> {
        self.reports.iter().find(|(k, _)| *k == self.winner).map(|(_, r)| r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame: u64,
    pub hands: Vec<HandFrame>,
    pub timings: StageTimings,
}

impl FrameResult {
    pub fn hand(&self, h: Handedness) -> Option<&HandFrame> {
        self.hands.iter().find(|f| f.hand == h)
    }
}

/// Whole-tracker state: configuration plus one or two hand trackers.
#[derive(Debug)]
pub struct TrackerState {
    config: TrackerConfig,
    hands: Vec<HandTracker>,
    frame: u64,
}

impl TrackerState {
    /// Tracker for a single right hand.
    pub fn new(model: ArticulatedModel, initial: &HandPose, config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate()?;
        let right = HandTracker::new(Handedness::Right, Arc::new(model), initial, &config)?;
        Ok(Self { config, hands: vec![right], frame: 0 })
    }

    /// Tracker for any set of hands; at most one per handedness.
    pub fn with_hands(config: TrackerConfig, hands: Vec<(Handedness, ArticulatedModel, HandPose)>) -> Result<Self, TrackerError> {
        config.validate()?;
        if hands.is_empty() {
            return Err(TrackerError::Config("at least one hand is required".into()));
        }
        let mut state = Self { config, hands: Vec::new(), frame: 0 };
        for (hand, model, initial) in hands {
            if state.hand(hand).is_some() {
                return Err(TrackerError::Config(format!("duplicate {hand:?} hand")));
            }
            state.add_hand(hand, model, &initial)?;
        }
        Ok(state)
    }

    /// Adds or replaces the tracker for `hand`.
    pub fn add_hand(&mut self, hand: Handedness, model: ArticulatedModel, initial: &HandPose) -> Result<(), TrackerError> {
        let t = HandTracker::new(hand, Arc::new(model), initial, &self.config)?;
        self.hands.retain(|h| h.hand != hand);
        self.hands.push(t);
        self.hands.sort_by_key(|h| h.hand);
        Ok(())
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn hand(&self, hand: Handedness) -> Option<&HandTracker> {
        self.hands.iter().find(|h| h.hand == hand)
    }

    pub fn hand_mut(&mut self, hand: Handedness) -> Option<&mut HandTracker> {
        self.hands.iter_mut().find(|h| h.hand == hand)
    }

    pub fn hands(&self) -> &[HandTracker] {
        &self.hands
    }
}

/// Runs one frame: deproject, split into hands, then per hand subsample,
/// bound, run every hypothesis and keep the best.
pub fn step_tracker(state: &mut TrackerState, image: &DepthImage) -> Result<FrameResult, TrackerError> {
    let cfg = &state.config;
    let mut timings = StageTimings::default();
    let t0 = Instant::now();
    let cloud = deproject(image);
    let length = state.hands.iter().map(|h| h.model().length()).fold(0.0, f64::max);
    let clusters = cluster_hands(&cloud, cfg.merge_factor * length);
    let wants_tips = cfg.strategies.contains(&StrategyKind::FeatureSeeded);
    let tips = if wants_tips { five_finger_detector(image, &cfg.detector) } else { None };
    // With two clusters the detection belongs to the nearer one.
    let tip_owner = tips.as_ref().map(|t| {
        let mean = t.iter().sum::<Vec3>() / 5.0;
        clusters
            .iter()
            .min_by(|a, b| {
                let ca = a.cloud.points.iter().sum::<Vec3>() / a.cloud.len() as f64;
                let cb = b.cloud.points.iter().sum::<Vec3>() / b.cloud.len() as f64;
                (ca - mean).norm().total_cmp(&(cb - mean).norm())
            })
            .map(|c| c.hand)
    });
    timings.subsample += t0.elapsed().as_secs_f64();

    let period = flip_period(cfg.frame_rate);
    let mut out = Vec::new();
    for tracker in &mut state.hands {
        let t = Instant::now();
        let empty = PointCloud::default();
        let own = clusters.iter().find(|c| c.hand == tracker.hand).map_or(&empty, |c| &c.cloud);
        let sub = voxel_subsample(own, cfg.voxel_size);
        let planes = if cfg.boundary { boundary_planes(own, cfg.near_margin) } else { BoundaryPlaneSet::default() };
        timings.subsample += t.elapsed().as_secs_f64();
        if sub.is_empty() {
            out.push(HandFrame {
                hand: tracker.hand,
                poses: tracker.best_poses(),
                winner: tracker.winner,
                reports: Vec::new(),
                empty: true,
                points: 0,
                rows: 0,
                constraints: 0,
            });
        } else {
            let mine = tip_owner.flatten() == Some(tracker.hand);
            let input = FrameInput { cloud: &sub, planes: &planes, image, tips: tips.as_ref().filter(|_| mine) };
            out.push(tracker.step(&input, cfg, &mut timings)?);
        }
        tracker.advance_schedule(period);
    }
    let result = FrameResult { frame: state.frame, hands: out, timings };
    state.frame += 1;
    Ok(result)
}
