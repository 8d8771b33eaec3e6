//! Scripted synthetic scenarios and the builtin library.

use std::path::{Path, PathBuf};

use nalgebra::Translation3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dynamics::JointAngles;
use crate::geometry::{RigidPose, UnitQuaternion, Vec3};
use crate::hypotheses::{Handedness, StrategyKind, TrackerConfig, TrackerState};
use crate::model::{
    default_hand, load_model, mirror_model, palm_facing_root, scale_model, ArticulatedModel, DigitState, HandPose,
    HandScaling,
};
use crate::sensor::{apply_noise, render_depth_into, CameraIntrinsics, DepthImage, NoiseConfig};

pub const SCENARIO_SCHEMA: &str = "phystrack.scenario/1";

/// One keyframe of a hand. The root is the palm-facing pose centered at
/// `center`, then rotated by `tilt_deg` (x, y, z Euler angles in camera
/// axes, applied x first) about that center. Articulation comes from
/// `angles_deg` (one twist/swing_y/swing_z triple per joint) or from
/// `digits`; neither means an open hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    #[serde(default)]
    pub time: f64,
    pub center: [f64; 3],
    #[serde(default)]
    pub tilt_deg: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digits: Option<[DigitState; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles_deg: Option<Vec<[f64; 3]>>,
}

impl Keyframe {
    pub fn at(time: f64, center: [f64; 3]) -> Self {
        Self { time, center, tilt_deg: [0.0; 3], digits: None, angles_deg: None }
    }

    pub fn tilt(mut self, deg: [f64; 3]) -> Self {
        self.tilt_deg = deg;
        self
    }

    pub fn digits(mut self, digits: [DigitState; 5]) -> Self {
        self.digits = Some(digits);
        self
    }

    pub fn root(&self) -> RigidPose {
        let c = Vec3::from(self.center);
        let [rx, ry, rz] = self.tilt_deg.map(f64::to_radians);
        let tilt = UnitQuaternion::from_euler_angles(rx, ry, rz);
        let about = Translation3::from(c) * RigidPose::from_parts(Translation3::identity(), tilt) * Translation3::from(-c);
        about * palm_facing_root(c)
    }

    pub fn pose(&self, model: &ArticulatedModel) -> Result<HandPose, HarnessError> {
        let root = self.root();
        if let Some(a) = &self.angles_deg {
            if a.len() != model.joints.len() {
                return Err(HarnessError::Config(format!(
                    "keyframe at {} s has {} joint angles, model has {} joints",
                    self.time,
                    a.len(),
                    model.joints.len()
                )));
            }
            let angles = a
                .iter()
                .map(|d| JointAngles { twist: d[0].to_radians(), swing_y: d[1].to_radians(), swing_z: d[2].to_radians() })
                .collect();
            return Ok(HandPose { root, angles });
        }
        Ok(HandPose::from_digits(model, root, &self.digits.unwrap_or_default()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandScript {
    pub hand: Handedness,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<HandScaling>,
    /// Strictly increasing in time; the pose holds before the first and
    /// after the last keyframe.
    pub keyframes: Vec<Keyframe>,
    /// Tracker starting pose; defaults to the truth at time 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Keyframe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Right-hand model file; the builtin hand when absent. Left hands use
    /// its mirror image. Relative paths resolve against the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub camera: CameraIntrinsics,
    pub frame_rate: f64,
    pub duration: f64,
    pub hands: Vec<HandScript>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a scenario file; a relative model path is made relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut s = Self::from_json(&text)?;
        if let Some(m) = &s.model {
            if m.is_relative() {
                s.model = Some(path.parent().unwrap_or(Path::new(".")).join(m));
            }
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema != SCENARIO_SCHEMA {
            return bad(format!("unsupported scenario schema {:?}, expected {SCENARIO_SCHEMA:?}", self.schema));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad(format!("frame_rate must be > 0, got {}", self.frame_rate));
        }
        if self.frame_count() == 0 {
            return bad("duration is shorter than one frame".into());
        }
        self.camera.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.noise.validate().map_err(HarnessError::Config)?;
        self.tracker.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.hands.is_empty() {
            return bad("scenario needs at least one hand".into());
        }
        for (i, h) in self.hands.iter().enumerate() {
            if self.hands[..i].iter().any(|o| o.hand == h.hand) {
                return bad(format!("duplicate {:?} hand", h.hand));
            }
            if h.keyframes.is_empty() {
                return bad(format!("{:?} hand has no keyframes", h.hand));
            }
            if h.keyframes.windows(2).any(|w| !(w[1].time > w[0].time)) {
                return bad(format!("{:?} hand keyframe times must strictly increase", h.hand));
            }
            let all = h.keyframes.iter().chain(&h.initial);
            for k in all {
                if !(k.time.is_finite() && k.center.iter().chain(&k.tilt_deg).all(|x| x.is_finite())) {
                    return bad(format!("{:?} hand has a non-finite keyframe", h.hand));
                }
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_strategies(mut self, strategies: &[StrategyKind]) -> Self {
        self.tracker.strategies = strategies.to_vec();
        self
    }

    /// The right-hand base model, then one model per scripted hand.
    pub fn models(&self) -> Result<Vec<ArticulatedModel>, HarnessError> {
        let base = match &self.model {
            None => default_hand(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
                load_model(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?
            }
        };
        self.hands
            .iter()
            .map(|h| {
                let scaled = match h.scaling {
                    Some(s) => scale_model(&base, s).map_err(|e| HarnessError::Config(e.to_string()))?,
                    None => base.clone(),
                };
                match h.hand {
                    Handedness::Right => Ok(scaled),
                    Handedness::Left => {
                        mirror_model(&scaled, &format!("{}_left", scaled.name)).map_err(|e| HarnessError::Config(e.to_string()))
                    }
                }
            })
            .collect()
    }

    /// Ground-truth pose of hand `index` at `time`.
    pub fn truth_pose(&self, index: usize, model: &ArticulatedModel, time: f64) -> Result<HandPose, HarnessError> {
        let ks = &self.hands[index].keyframes;
        let next = ks.iter().position(|k| k.time > time);
        match next {
            Some(0) => ks[0].pose(model),
            None => ks[ks.len() - 1].pose(model),
            Some(i) => {
                let (a, b) = (&ks[i - 1], &ks[i]);
                let t = (time - a.time) / (b.time - a.time);
                Ok(a.pose(model)?.lerp(&b.pose(model)?, t))
            }
        }
    }

    pub fn initial_pose(&self, index: usize, model: &ArticulatedModel) -> Result<HandPose, HarnessError> {
        match &self.hands[index].initial {
            Some(k) => k.pose(model),
            None => self.truth_pose(index, model, 0.0),
        }
    }

    /// Tracker configured for this scenario's frame rate and hands.
    pub fn tracker(&self, models: &[ArticulatedModel]) -> Result<TrackerState, HarnessError> {
        let mut cfg = self.tracker.clone();
        cfg.frame_rate = self.frame_rate;
        let hands = self
            .hands
            .iter()
            .zip(models)
            .enumerate()
            .map(|(i, (h, m))| Ok((h.hand, m.clone(), self.initial_pose(i, m)?)))
            .collect::<Result<Vec<_>, HarnessError>>()?;
        TrackerState::with_hands(cfg, hands).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// Renders the scripted truth frame by frame. All noise comes from one
/// ChaCha8 stream seeded with the scenario seed, so replaying a scenario
/// reproduces every image bit for bit.
pub struct SyntheticCamera<'a> {
    scenario: &'a Scenario,
    models: Vec<ArticulatedModel>,
    rng: ChaCha8Rng,
    frame: usize,
}

/// One rendered frame with its truth.
pub struct SyntheticFrame {
    pub frame: usize,
    pub time: f64,
    /// Per scripted hand, body poses.
    pub truth: Vec<Vec<RigidPose>>,
    pub image: DepthImage,
}

impl<'a> SyntheticCamera<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, HarnessError> {
        scenario.validate()?;
        let models = scenario.models()?;
        Ok(Self { scenario, models, rng: ChaCha8Rng::seed_from_u64(scenario.seed), frame: 0 })
    }

    pub fn models(&self) -> &[ArticulatedModel] {
        &self.models
    }

    pub fn next_frame(&mut self) -> Result<Option<SyntheticFrame>, HarnessError> {
        if self.frame >= self.scenario.frame_count() {
            return Ok(None);
        }
        let time = self.frame as f64 / self.scenario.frame_rate;
        let mut truth = Vec::with_capacity(self.models.len());
        for (i, m) in self.models.iter().enumerate() {
            truth.push(self.scenario.truth_pose(i, m, time)?.body_poses(m));
        }
        let mut image = DepthImage::blank(self.scenario.camera);
        for (m, poses) in self.models.iter().zip(&truth) {
            let hulls: Vec<_> = m.bodies.iter().zip(poses).map(|(b, p)| (&*b.shape, *p)).collect();
            render_depth_into(&mut image, &hulls);
        }
        apply_noise(&mut image, &self.scenario.noise, &mut self.rng);
        let out = SyntheticFrame { frame: self.frame, time, truth, image };
        self.frame += 1;
        Ok(Some(out))
    }
}

const OPEN: DigitState = DigitState { curl: 0.0, spread: 0.0, knuckle_bend: 0.0 };
const CLOSED: DigitState = DigitState { curl: 1.0, spread: 1.0, knuckle_bend: 0.0 };
const KNIFE: DigitState = DigitState { curl: 0.0, spread: 1.0, knuckle_bend: 0.0 };
const CENTER: [f64; 3] = [0.0, 0.0, 0.45];

fn base(name: &str, description: &str, duration: f64, hands: Vec<HandScript>) -> Scenario {
    Scenario {
        schema: SCENARIO_SCHEMA.into(),
        name: name.into(),
        description: description.into(),
        model: None,
        camera: CameraIntrinsics::default(),
        frame_rate: 60.0,
        duration,
        hands,
        noise: NoiseConfig::default(),
        tracker: TrackerConfig::default(),
        seed: 1,
    }
}

fn right(keyframes: Vec<Keyframe>) -> HandScript {
    HandScript { hand: Handedness::Right, scaling: None, keyframes, initial: None }
}

fn sensor_noise() -> NoiseConfig {
    NoiseConfig { sigma: 0.001, dropout: 0.01, ..NoiseConfig::default() }
}

/// Side-to-side wave sampled every 50 ms: `amplitude` m of x travel and
/// `roll` degrees of in-plane rotation with the given period.
fn wave(duration: f64, amplitude: f64, roll: f64, period: f64) -> Vec<Keyframe> {
    let n = (duration / 0.05).ceil() as usize;
    (0..=n)
        .map(|k| {
            let t = k as f64 * 0.05;
            let s = (std::f64::consts::TAU * t / period).sin();
            Keyframe::at(t, [CENTER[0] + amplitude * s, CENTER[1], CENTER[2]]).tilt([0.0, 0.0, roll * s])
        })
        .collect()
}

pub fn static_hand() -> Scenario {
    base("static-hand", "open hand held still, noise-free", 2.0, vec![right(vec![Keyframe::at(0.0, CENTER)])])
}

pub fn slow_wave() -> Scenario {
    base("slow-wave", "open hand waving slowly, noise-free", 4.0, vec![right(wave(4.0, 0.04, 10.0, 4.0))])
}

/// Fast side-to-side wave; `duration` stretches the same motion.
pub fn fast_wave_for(duration: f64) -> Scenario {
    let mut s = base("fast-wave", "open hand waving quickly with sensor noise", duration, vec![right(wave(duration, 0.1, 15.0, 0.8))]);
    s.noise = sensor_noise();
    // Depth noise spreads the hand over more voxels; 8 mm keeps the cloud
    // under 500 points.
    s.tracker.voxel_size = 0.008;
    s
}

pub fn fast_wave() -> Scenario {
    fast_wave_for(2.0)
}

pub fn fist_to_open() -> Scenario {
    let fist = Keyframe::at(0.0, CENTER).digits([CLOSED; 5]);
    let hold = Keyframe { time: 0.25, ..fist.clone() };
    let open = Keyframe::at(0.25 + 1.0 / 60.0, CENTER).digits([OPEN; 5]);
    let mut s = base("fist-to-open", "fist that opens in one frame, independent hypotheses", 2.0, vec![right(vec![fist, hold, open])]);
    s.tracker.independent = true;
    s
}

pub fn wrong_finger_seed() -> Scenario {
    let pointing = [CLOSED, OPEN, CLOSED, CLOSED, CLOSED];
    let wrong = [CLOSED, CLOSED, OPEN, CLOSED, CLOSED];
    let mut hand = right(vec![Keyframe::at(0.0, CENTER).digits(pointing)]);
    hand.initial = Some(Keyframe::at(0.0, CENTER).digits(wrong));
    let mut s = base("wrong-finger-seed", "index finger pointing, tracker seeded with the middle finger", 2.0, vec![hand]);
    s.noise = NoiseConfig { sigma: 0.0005, ..NoiseConfig::default() };
    s
}

pub fn knife_hand_bend() -> Scenario {
    // Fingers point away from the camera with the heel of the palm in
    // front, so the fingers are hidden until they bend down into view.
    let tilt = [-70.0, 0.0, 0.0];
    let straight = Keyframe::at(0.0, CENTER).tilt(tilt).digits([KNIFE; 5]);
    let hold = Keyframe { time: 0.5, ..straight.clone() };
    let mut bent = [KNIFE; 5];
    for d in &mut bent[1..] {
        d.knuckle_bend = 70.0;
    }
    let end = Keyframe { time: 1.5, digits: Some(bent), ..straight.clone() };
    base("knife-hand-bend", "knife hand, palm heel toward the camera, fingers bend", 2.0, vec![right(vec![straight, hold, end])])
}

pub fn two_hands() -> Scenario {
    let r = right(wave(2.0, 0.02, 0.0, 2.0).into_iter().map(|k| shifted(k, [0.2, 0.0, 0.15])).collect());
    let l = HandScript {
        hand: Handedness::Left,
        scaling: None,
        keyframes: wave(2.0, 0.02, 0.0, 2.0).into_iter().map(|k| shifted(k, [-0.2, 0.0, 0.15])).collect(),
        initial: None,
    };
    base("two-hands", "left and right hands 40 cm apart", 2.0, vec![r, l])
}

fn shifted(mut k: Keyframe, by: [f64; 3]) -> Keyframe {
    for (c, d) in k.center.iter_mut().zip(by) {
        *c += d;
    }
    k
}

pub fn voxel_sweep() -> Scenario {
    let mut s = base("voxel-sweep", "moderate wave with sensor noise, for voxel-size sweeps", 2.0, vec![right(wave(2.0, 0.05, 10.0, 2.0))]);
    s.noise = sensor_noise();
    s
}

pub fn detector_reset() -> Scenario {
    let mut hand = right(vec![Keyframe::at(0.0, CENTER)]);
    hand.initial = Some(Keyframe::at(0.0, [0.02, -0.02, 0.46]).tilt([0.0, 10.0, 15.0]).digits([CLOSED; 5]));
    base("detector-reset", "open hand, tracker starts from a corrupted fist", 1.0, vec![hand])
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        static_hand(),
        slow_wave(),
        fast_wave(),
        fist_to_open(),
        wrong_finger_seed(),
        knife_hand_bend(),
        two_hands(),
        voxel_sweep(),
        detector_reset(),
    ]
}

pub fn builtin(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

/// A builtin name or a path to a scenario file.
pub fn resolve_scenario(arg: &str) -> Result<Scenario, HarnessError> {
    let path = Path::new(arg);
    if path.exists() {
        return Scenario::load(path);
    }
    builtin(arg).ok_or_else(|| {
        HarnessError::Io(format!("{arg}: no such scenario file or builtin (see list-scenarios)"))
    })
}
