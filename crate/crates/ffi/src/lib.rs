//! C ABI over the tracker. Every function returns a [`PtStatus`]; on
//! failure a message is kept per thread and read with [`pt_last_error`].
//! Handles are opaque and owned by the caller until passed to the matching
//! `_free` function.
//!
//! Safety contract for every function: pointers are null or valid for the
//! stated element count, strings are NUL terminated, and a handle is not
//! used after it is freed or from two threads at once.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use phystrack::geometry::RigidPose;
use phystrack::hypotheses::{step_tracker, FrameResult, Handedness, StrategyKind, TrackerConfig, TrackerState};
use phystrack::model::{default_hand, default_left_hand, load_model, palm_facing_root, ArticulatedModel, HandPose};
use phystrack::sensor::{CameraIntrinsics, DepthImage, DepthSequenceReader, GroundTruth};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Model = 5,
    Tracker = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtHand {
    Left = 0,
    Right = 1,
}

impl From<PtHand> for Handedness {
    fn from(h: PtHand) -> Self {
        match h {
            PtHand::Left => Handedness::Left,
            PtHand::Right => Handedness::Right,
        }
    }
}

/// Pinhole camera. `near` and `far` clip the depth range in meters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub near: f64,
    pub far: f64,
}

impl From<PtIntrinsics> for CameraIntrinsics {
    fn from(i: PtIntrinsics) -> Self {
        CameraIntrinsics { width: i.width as usize, height: i.height as usize, fx: i.fx, fy: i.fy, cx: i.cx, cy: i.cy, near: i.near, far: i.far }
    }
}

impl From<CameraIntrinsics> for PtIntrinsics {
    fn from(i: CameraIntrinsics) -> Self {
        PtIntrinsics { width: i.width as u32, height: i.height as u32, fx: i.fx, fy: i.fy, cx: i.cx, cy: i.cy, near: i.near, far: i.far }
    }
}

pub struct PtModel {
    model: ArticulatedModel,
}

pub struct PtTracker {
    state: TrackerState,
    last: Option<FrameResult>,
}

pub struct PtDepthReader {
    reader: DepthSequenceReader<BufReader<File>>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(PtStatus, String);

type Outcome = Result<(), Failure>;

fn fail(status: PtStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Outcome) -> PtStatus {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
        Err(fail(PtStatus::Panic, format!("internal panic: {}", msg.unwrap_or_default())))
    });
    match result {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            PtStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(PtStatus::NullArgument, format!("{what} is null")))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(PtStatus::NullArgument, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(PtStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PtStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Outcome {
    let out = get_mut(out, "out")?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn root_pose(root: *const f64) -> RigidPose {
    if root.is_null() {
        return palm_facing_root([0.0, 0.0, 0.45].into());
    }
    let a: [f64; 7] = std::slice::from_raw_parts(root, 7).try_into().expect("seven values");
    GroundTruth::decode_pose(&a)
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// including the terminator, so a zero-length call sizes the buffer.
#[no_mangle]
pub unsafe extern "C" fn pt_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The builtin 17-bone hand, or its mirror image for the left hand.
#[no_mangle]
pub unsafe extern "C" fn pt_model_default(hand: PtHand, out: *mut *mut PtModel) -> PtStatus {
    guard(|| {
        let model = match hand {
            PtHand::Right => default_hand(),
            PtHand::Left => default_left_hand(),
        };
        put(out, PtModel { model })
    })
}

/// Parses a model file's JSON text.
#[no_mangle]
pub unsafe extern "C" fn pt_model_from_json(json: *const c_char, out: *mut *mut PtModel) -> PtStatus {
    guard(|| {
        let model = load_model(text(json, "json")?).map_err(|e| fail(PtStatus::Model, e.to_string()))?;
        put(out, PtModel { model })
    })
}

#[no_mangle]
pub unsafe extern "C" fn pt_model_free(model: *mut PtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pt_model_body_count(model: *const PtModel, out: *mut usize) -> PtStatus {
    guard(|| {
        *get_mut(out, "out")? = get(model, "model")?.model.bodies.len();
        Ok(())
    })
}

/// Starts a tracker for one hand in the open pose at `root` (x, y, z, then
/// quaternion w, x, y, z; null means palm toward the camera 45 cm away).
/// `config_json` may be null for defaults. The model is copied.
#[no_mangle]
pub unsafe extern "C" fn pt_tracker_new(
    model: *const PtModel,
    hand: PtHand,
    root: *const f64,
    config_json: *const c_char,
    out: *mut *mut PtTracker,
) -> PtStatus {
    guard(|| {
        let model = get(model, "model")?.model.clone();
        let config = if config_json.is_null() {
            TrackerConfig::default()
        } else {
            serde_json::from_str(text(config_json, "config_json")?).map_err(|e| fail(PtStatus::Config, e.to_string()))?
        };
        let pose = HandPose::open(&model, root_pose(root));
        let state = TrackerState::with_hands(config, vec![(hand.into(), model, pose)]).map_err(|e| fail(PtStatus::Config, e.to_string()))?;
        put(out, PtTracker { state, last: None })
    })
}

/// Adds a second hand, or replaces the tracker of an existing one.
#[no_mangle]
pub unsafe extern "C" fn pt_tracker_add_hand(tracker: *mut PtTracker, model: *const PtModel, hand: PtHand, root: *const f64) -> PtStatus {
    guard(|| {
        let t = get_mut(tracker, "tracker")?;
        let model = get(model, "model")?.model.clone();
        let pose = HandPose::open(&model, root_pose(root));
        t.state.add_hand(hand.into(), model, &pose).map_err(|e| fail(PtStatus::Config, e.to_string()))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pt_tracker_free(tracker: *mut PtTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Tracks one depth frame: `count` row-major depths in meters, 0 for no
/// return, `count == width * height`.
#[no_mangle]
pub unsafe extern "C" fn pt_tracker_step(tracker: *mut PtTracker, intrinsics: *const PtIntrinsics, depth: *const f32, count: usize) -> PtStatus {
    guard(|| {
        let t = get_mut(tracker, "tracker")?;
        let cam: CameraIntrinsics = (*get(intrinsics, "intrinsics")?).into();
        cam.validate().map_err(|e| fail(PtStatus::InvalidArgument, e.to_string()))?;
        if count != cam.width * cam.height {
            return Err(fail(PtStatus::InvalidArgument, format!("expected {} depths, got {count}", cam.width * cam.height)));
        }
        if depth.is_null() {
            return Err(fail(PtStatus::NullArgument, "depth is null"));
        }
        let values = std::slice::from_raw_parts(depth, count);
        if let Some(bad) = values.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(fail(PtStatus::InvalidArgument, format!("invalid depth {bad}")));
        }
        let image = DepthImage { intrinsics: cam, depth: values.to_vec() };
        let result = step_tracker(&mut t.state, &image).map_err(|e| fail(PtStatus::Tracker, e.to_string()))?;
        t.last = Some(result);
        Ok(())
    })
}

/// Writes the hand's best pose, 7 values per body (x, y, z, w, qx, qy,
/// qz). `written` receives the number of values needed; with a short
/// buffer nothing is copied and BufferTooSmall is returned.
#[no_mangle]
pub unsafe extern "C" fn pt_tracker_pose(tracker: *const PtTracker, hand: PtHand, out: *mut f64, capacity: usize, written: *mut usize) -> PtStatus {
    guard(|| {
        let t = get(tracker, "tracker")?;
        let h = t.state.hand(hand.into()).ok_or_else(|| fail(PtStatus::InvalidArgument, format!("no {hand:?} hand is tracked")))?;
        let poses = h.best_poses();
        let n = poses.len() * 7;
        *get_mut(written, "written")? = n;
        if capacity < n {
            return Err(fail(PtStatus::BufferTooSmall, format!("need {n} values, got {capacity}")));
        }
        if out.is_null() {
            return Err(fail(PtStatus::NullArgument, "out is null"));
        }
        let dst = std::slice::from_raw_parts_mut(out, n);
        for (chunk, p) in dst.chunks_exact_mut(7).zip(&poses) {
            chunk.copy_from_slice(&GroundTruth::encode_pose(p));
        }
        Ok(())
    })
}

/// Winning strategy of the last frame (0 normal, 1 gross motion, 2
/// grasping, 3 finger flip, 4 feature seeded) and its errTotal in meters.
/// Fails before the first step or when the hand saw no points.
#[no_mangle]
pub unsafe extern "C" fn pt_tracker_last_result(tracker: *const PtTracker, hand: PtHand, strategy: *mut i32, err_total: *mut f64) -> PtStatus {
    guard(|| {
        let t = get(tracker, "tracker")?;
        let frame = t.last.as_ref().ok_or_else(|| fail(PtStatus::InvalidArgument, "no frame tracked yet"))?;
        let h = frame.hand(hand.into()).ok_or_else(|| fail(PtStatus::InvalidArgument, format!("no {hand:?} hand is tracked")))?;
        let report = h.best_error().ok_or_else(|| fail(PtStatus::InvalidArgument, "hand had no points last frame"))?;
        *get_mut(strategy, "strategy")? = StrategyKind::ALL.iter().position(|k| *k == h.winner).expect("known strategy") as i32;
        *get_mut(err_total, "err_total")? = report.total;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pt_depth_reader_open(path: *const c_char, out: *mut *mut PtDepthReader) -> PtStatus {
    guard(|| {
        let path = text(path, "path")?;
        let file = File::open(path).map_err(|e| fail(PtStatus::Io, format!("{path}: {e}")))?;
        let reader = DepthSequenceReader::new(BufReader::new(file)).map_err(|e| fail(PtStatus::Io, format!("{path}: {e}")))?;
        put(out, PtDepthReader { reader })
    })
}

/// Header of an open sequence. Any output pointer may be null. The file
/// does not store clip planes, so `near` and `far` come back as the
/// reader's permissive defaults.
#[no_mangle]
pub unsafe extern "C" fn pt_depth_reader_info(
    reader: *const PtDepthReader,
    intrinsics: *mut PtIntrinsics,
    frame_rate: *mut f64,
    frame_count: *mut u32,
) -> PtStatus {
    guard(|| {
        let r = &get(reader, "reader")?.reader;
        if let Some(i) = intrinsics.as_mut() {
            *i = r.intrinsics.into();
        }
        if let Some(f) = frame_rate.as_mut() {
            *f = r.frame_rate;
        }
        if let Some(c) = frame_count.as_mut() {
            *c = r.frame_count;
        }
        Ok(())
    })
}

/// Reads the next frame into `out` (width * height floats). `has_frame`
/// is set to 0 after the last frame.
#[no_mangle]
pub unsafe extern "C" fn pt_depth_reader_next(reader: *mut PtDepthReader, out: *mut f32, capacity: usize, has_frame: *mut i32) -> PtStatus {
    guard(|| {
        let r = &mut get_mut(reader, "reader")?.reader;
        let has = get_mut(has_frame, "has_frame")?;
        let n = r.intrinsics.width * r.intrinsics.height;
        if capacity < n {
            return Err(fail(PtStatus::BufferTooSmall, format!("need {n} values, got {capacity}")));
        }
        if out.is_null() {
            return Err(fail(PtStatus::NullArgument, "out is null"));
        }
        match r.next_frame().map_err(|e| fail(PtStatus::Io, e.to_string()))? {
            Some(img) => {
                std::slice::from_raw_parts_mut(out, n).copy_from_slice(&img.depth);
                *has = 1;
            }
            None => *has = 0,
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pt_depth_reader_free(reader: *mut PtDepthReader) {
    if !reader.is_null() {
        drop(Box::from_raw(reader));
    }
}
