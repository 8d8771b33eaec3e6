//! Running a scenario through the tracker and summarizing the trace.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::scenario::{Scenario, SyntheticCamera, SyntheticFrame};
use super::HarnessError;
use crate::geometry::{transform_point, RigidPose, Vec3};
use crate::hypotheses::{step_tracker, Handedness, StageTimings, StrategyKind};
use crate::model::ArticulatedModel;
use crate::sensor::GroundTruth;

pub const TRACE_SCHEMA: &str = "phystrack.trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyError {
    pub strategy: StrategyKind,
    pub fit: f64,
    pub occlusion: f64,
    pub total: f64,
}

/// One hand in one frame. Poses are translation then quaternion (w, x, y,
/// z); tips are listed thumb first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandRecord {
    pub hand: Handedness,
    pub truth: Vec<[f64; 7]>,
    pub best: Vec<[f64; 7]>,
    pub truth_tips: Vec<[f64; 3]>,
    pub best_tips: Vec<[f64; 3]>,
    pub truth_joints: Vec<[f64; 3]>,
    pub best_joints: Vec<[f64; 3]>,
    pub winner: StrategyKind,
    /// Per enabled strategy, in tie-break order; empty when no points
    /// reached the hand.
    pub errors: Vec<StrategyError>,
    pub empty: bool,
    pub points: usize,
    pub rows: usize,
    pub constraints: usize,
    /// Worst joint anchor separation over all hypothesis worlds, m.
    pub anchor_drift: f64,
    /// Worst joint-limit excess over all hypothesis worlds, rad.
    pub limit_excess: f64,
}

impl HandRecord {
    pub fn best_total(&self) -> Option<f64> {
        self.errors.iter().find(|e| e.strategy == self.winner).map(|e| e.total)
    }

    pub fn total_of(&self, k: StrategyKind) -> Option<f64> {
        self.errors.iter().find(|e| e.strategy == k).map(|e| e.total)
    }

    pub fn tip_errors(&self) -> Vec<f64> {
        self.truth_tips.iter().zip(&self.best_tips).map(|(a, b)| (Vec3::from(*a) - Vec3::from(*b)).norm()).collect()
    }

    pub fn joint_errors(&self) -> Vec<f64> {
        self.truth_joints.iter().zip(&self.best_joints).map(|(a, b)| (Vec3::from(*a) - Vec3::from(*b)).norm()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub time: f64,
    pub hands: Vec<HandRecord>,
    /// Wall-clock; excluded from determinism comparisons.
    pub timings: StageTimings,
    pub frame_time: f64,
}

impl FrameRecord {
    pub fn hand(&self, h: Handedness) -> Option<&HandRecord> {
        self.hands.iter().find(|r| r.hand == h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    pub frame_rate: f64,
    pub strategies: Vec<StrategyKind>,
    /// Body names per hand, in record order.
    pub bodies: Vec<Vec<String>>,
    pub frames: Vec<FrameRecord>,
}

impl Trace {
    /// Copy with every wall-clock field zeroed; two runs of the same
    /// scenario and seed produce identical stripped traces.
    pub fn without_timings(&self) -> Trace {
        let mut t = self.clone();
        for f in &mut t.frames {
            f.timings = StageTimings::default();
            f.frame_time = 0.0;
        }
        t
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let t: Trace = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("trace: {e}")))?;
        if t.schema != TRACE_SCHEMA {
            return Err(HarnessError::Config(format!("unsupported trace schema {:?}", t.schema)));
        }
        Ok(t)
    }

    pub fn hands(&self) -> Vec<Handedness> {
        self.frames.first().map(|f| f.hands.iter().map(|h| h.hand).collect()).unwrap_or_default()
    }

    /// Root mean square over every frame and fingertip of every hand, m.
    pub fn fingertip_rms(&self) -> f64 {
        rms(self.frames.iter().flat_map(|f| f.hands.iter().flat_map(|h| h.tip_errors())))
    }

    /// Mean winning errTotal over frames and hands that saw points, m.
    pub fn mean_err_total(&self) -> f64 {
        mean(self.frames.iter().flat_map(|f| f.hands.iter().filter_map(|h| h.best_total())))
    }

    pub fn mean_constraints(&self) -> f64 {
        mean(self.frames.iter().flat_map(|f| f.hands.iter().map(|h| h.constraints as f64)))
    }

    pub fn frame_times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.frame_time).collect()
    }
}

pub(crate) fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

pub(crate) fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Mean, median, nearest-rank 95th percentile and max.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        if values.is_empty() {
            return Stats::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Stats { mean: mean(v.iter().copied()), median, p95: v[rank - 1], max: v[n - 1] }
    }

    fn scaled(self, k: f64) -> Stats {
        Stats { mean: self.mean * k, median: self.median * k, p95: self.p95 * k, max: self.max * k }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub subsample_ms: Stats,
    pub bind_ms: Stats,
    pub solve_ms: Stats,
    pub evaluate_ms: Stats,
    pub frame_ms: Stats,
}

/// Aggregate accuracy and timing of one run. Lengths are millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub frames: usize,
    pub joint_error_mm: Stats,
    pub fingertip_rms_mm: f64,
    pub fingertip_mean_mm: f64,
    pub err_total_mean_mm: f64,
    pub mean_points: f64,
    pub mean_constraints: f64,
    pub winners: BTreeMap<StrategyKind, usize>,
    pub max_anchor_drift_mm: f64,
    pub max_limit_excess_rad: f64,
    pub timing: TimingSummary,
}

impl Summary {
    pub fn of(trace: &Trace) -> Summary {
        let hands = || trace.frames.iter().flat_map(|f| f.hands.iter());
        let joints: Vec<f64> = hands().flat_map(|h| h.joint_errors()).collect();
        let mut winners = BTreeMap::new();
        for h in hands().filter(|h| !h.empty) {
            *winners.entry(h.winner).or_insert(0) += 1;
        }
        let stage = |f: fn(&StageTimings) -> f64| {
            Stats::of(&trace.frames.iter().map(|r| f(&r.timings)).collect::<Vec<_>>()).scaled(1e3)
        };
        Summary {
            scenario: trace.scenario.clone(),
            seed: trace.seed,
            frames: trace.frames.len(),
            joint_error_mm: Stats::of(&joints).scaled(1e3),
            fingertip_rms_mm: trace.fingertip_rms() * 1e3,
            fingertip_mean_mm: mean(hands().flat_map(|h| h.tip_errors())) * 1e3,
            err_total_mean_mm: trace.mean_err_total() * 1e3,
            mean_points: mean(hands().map(|h| h.points as f64)),
            mean_constraints: trace.mean_constraints(),
            winners,
            max_anchor_drift_mm: hands().map(|h| h.anchor_drift).fold(0.0, f64::max) * 1e3,
            max_limit_excess_rad: hands().map(|h| h.limit_excess).fold(0.0, f64::max),
            timing: TimingSummary {
                subsample_ms: stage(|t| t.subsample),
                bind_ms: stage(|t| t.bind),
                solve_ms: stage(|t| t.solve),
                evaluate_ms: stage(|t| t.evaluate),
                frame_ms: Stats::of(&trace.frame_times()).scaled(1e3),
            },
        }
    }
}

fn tips(model: &ArticulatedModel, poses: &[RigidPose]) -> Vec<[f64; 3]> {
    (0..5).filter_map(|f| model.tip_point(f, poses)).map(|p| p.into()).collect()
}

fn joints(model: &ArticulatedModel, poses: &[RigidPose]) -> Vec<[f64; 3]> {
    model.joints.iter().map(|j| transform_point(&poses[j.parent], &j.parent_anchor).into()).collect()
}

/// Runs the whole scenario, calling `observe` after every frame.
pub fn run_scenario_observed(
    scenario: &Scenario,
    mut observe: impl FnMut(&SyntheticFrame, &FrameRecord) -> Result<(), HarnessError>,
) -> Result<(Trace, Summary), HarnessError> {
    let mut camera = SyntheticCamera::new(scenario)?;
    let models = camera.models().to_vec();
    let mut state = scenario.tracker(&models)?;
    // Tracker hands are kept in handedness order; map them to script order.
    let order: Vec<usize> = scenario
        .hands
        .iter()
        .map(|h| state.hands().iter().position(|t| t.hand == h.hand).expect("every scripted hand is tracked"))
        .collect();
    let mut frames = Vec::with_capacity(scenario.frame_count());
    while let Some(frame) = camera.next_frame()? {
        let t = Instant::now();
        let result = step_tracker(&mut state, &frame.image).map_err(|e| HarnessError::Config(e.to_string()))?;
        let frame_time = t.elapsed().as_secs_f64();
        let mut hands = Vec::with_capacity(order.len());
        for ((model, truth), &k) in models.iter().zip(&frame.truth).zip(&order) {
            let tracker = &state.hands()[k];
            let out = &result.hands[k];
            let mut drift: f64 = model.anchor_drift(&out.poses);
            let mut excess: f64 = model.limit_excess(&out.poses);
            for h in tracker.hypotheses() {
                let p = h.world.poses();
                drift = drift.max(model.anchor_drift(&p));
                excess = excess.max(model.limit_excess(&p));
            }
            hands.push(HandRecord {
                hand: out.hand,
                truth: truth.iter().map(GroundTruth::encode_pose).collect(),
                best: out.poses.iter().map(GroundTruth::encode_pose).collect(),
                truth_tips: tips(model, truth),
                best_tips: tips(model, &out.poses),
                truth_joints: joints(model, truth),
                best_joints: joints(model, &out.poses),
                winner: out.winner,
                errors: out
                    .reports
                    .iter()
                    .map(|(k, r)| StrategyError { strategy: *k, fit: r.fit_sum(), occlusion: r.occlusion_sum(), total: r.total })
                    .collect(),
                empty: out.empty,
                points: out.points,
                rows: out.rows,
                constraints: out.constraints,
                anchor_drift: drift,
                limit_excess: excess,
            });
        }
        let record = FrameRecord { frame: frame.frame, time: frame.time, hands, timings: result.timings, frame_time };
        observe(&frame, &record)?;
        frames.push(record);
    }
    let mut strategies = state.config().strategies.clone();
    strategies.sort();
    strategies.dedup();
    let trace = Trace {
        schema: TRACE_SCHEMA.into(),
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        frame_rate: scenario.frame_rate,
        strategies,
        bodies: models.iter().map(|m| m.bodies.iter().map(|b| b.name.clone()).collect()).collect(),
        frames,
    };
    let summary = Summary::of(&trace);
    Ok((trace, summary))
}

pub fn run_scenario(scenario: &Scenario) -> Result<(Trace, Summary), HarnessError> {
    run_scenario_observed(scenario, |_, _| Ok(()))
}
