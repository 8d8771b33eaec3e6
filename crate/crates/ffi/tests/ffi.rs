use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use phystrack::geometry::Vec3;
use phystrack::model::{default_hand, palm_facing_root, HandPose};
use phystrack::sensor::{render_depth, CameraIntrinsics, DepthSequenceWriter, GroundTruth};
use phystrack_ffi::*;

fn last_error() -> String {
    let n = unsafe { pt_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; n];
    unsafe { pt_last_error(buf.as_mut_ptr(), n) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn intrinsics() -> PtIntrinsics {
    CameraIntrinsics::default().into()
}

fn render(root: Vec3) -> Vec<f32> {
    let model = default_hand();
    let poses = HandPose::open(&model, palm_facing_root(root)).body_poses(&model);
    let bodies: Vec<_> = model.bodies.iter().zip(poses).map(|(b, p)| (&*b.shape, p)).collect();
    render_depth(&bodies, &CameraIntrinsics::default()).depth
}

fn new_model() -> *mut PtModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pt_model_default(PtHand::Right, &mut m) }, PtStatus::Ok);
    m
}

#[test]
fn null_arguments_are_reported_not_dereferenced() {
    let mut n = 0usize;
    assert_eq!(unsafe { pt_model_body_count(ptr::null(), &mut n) }, PtStatus::NullArgument);
    assert!(last_error().contains("model"));
    assert_eq!(unsafe { pt_model_default(PtHand::Left, ptr::null_mut()) }, PtStatus::NullArgument);
    assert_eq!(unsafe { pt_tracker_step(ptr::null_mut(), ptr::null(), ptr::null(), 0) }, PtStatus::NullArgument);
    unsafe {
        pt_model_free(ptr::null_mut());
        pt_tracker_free(ptr::null_mut());
        pt_depth_reader_free(ptr::null_mut());
    }
}

#[test]
fn error_message_truncates_and_clears() {
    let bad = CString::new("{").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pt_model_from_json(bad.as_ptr(), &mut m) }, PtStatus::Model);
    assert!(m.is_null());
    let full = last_error();
    assert!(!full.is_empty());
    let mut small = [1 as std::ffi::c_char; 4];
    assert_eq!(unsafe { pt_last_error(small.as_mut_ptr(), 4) }, full.len() + 1);
    assert_eq!(small[3], 0);
    let m = new_model();
    assert_eq!(last_error(), "");
    unsafe { pt_model_free(m) };
    assert!(unsafe { CStr::from_ptr(pt_version()) }.to_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
}

#[test]
fn model_json_roundtrips() {
    let text = CString::new(phystrack::model::serialize_model(&default_hand())).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pt_model_from_json(text.as_ptr(), &mut m) }, PtStatus::Ok, "{}", last_error());
    let mut n = 0;
    assert_eq!(unsafe { pt_model_body_count(m, &mut n) }, PtStatus::Ok);
    assert_eq!(n, 17);
    unsafe { pt_model_free(m) };
}

#[test]
fn tracker_follows_a_shifted_hand() {
    let model = new_model();
    let start = Vec3::new(0.0, 0.0, 0.45);
    let root = GroundTruth::encode_pose(&palm_facing_root(start));
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { pt_tracker_new(model, PtHand::Right, root.as_ptr(), ptr::null(), &mut t) }, PtStatus::Ok, "{}", last_error());

    let (mut strategy, mut err) = (-1, 0.0);
    assert_eq!(unsafe { pt_tracker_last_result(t, PtHand::Right, &mut strategy, &mut err) }, PtStatus::InvalidArgument);

    let target = start + Vec3::new(0.004, 0.0, 0.0);
    let depth = render(target);
    let cam = intrinsics();
    assert_eq!(unsafe { pt_tracker_step(t, &cam, depth.as_ptr(), depth.len() - 1) }, PtStatus::InvalidArgument);
    for _ in 0..10 {
        assert_eq!(unsafe { pt_tracker_step(t, &cam, depth.as_ptr(), depth.len()) }, PtStatus::Ok, "{}", last_error());
    }
    assert_eq!(unsafe { pt_tracker_last_result(t, PtHand::Right, &mut strategy, &mut err) }, PtStatus::Ok);
    assert!((0..5).contains(&strategy));
    assert!(err >= 0.0 && err < 0.05, "{err}");

    let mut written = 0;
    assert_eq!(unsafe { pt_tracker_pose(t, PtHand::Right, ptr::null_mut(), 0, &mut written) }, PtStatus::BufferTooSmall);
    assert_eq!(written, 17 * 7);
    let mut out = vec![0.0; written];
    assert_eq!(unsafe { pt_tracker_pose(t, PtHand::Right, out.as_mut_ptr(), out.len(), &mut written) }, PtStatus::Ok);
    let truth = HandPose::open(&default_hand(), palm_facing_root(target)).body_poses(&default_hand());
    let palm = Vec3::new(out[0], out[1], out[2]);
    assert!((palm - truth[0].translation.vector).norm() < 2e-3, "palm {palm:?}");
    assert_eq!(unsafe { pt_tracker_pose(t, PtHand::Left, out.as_mut_ptr(), out.len(), &mut written) }, PtStatus::InvalidArgument);

    let mut bad = depth.clone();
    bad[0] = f32::NAN;
    assert_eq!(unsafe { pt_tracker_step(t, &cam, bad.as_ptr(), bad.len()) }, PtStatus::InvalidArgument);
    unsafe {
        pt_tracker_free(t);
        pt_model_free(model);
    }
}

#[test]
fn bad_config_is_a_config_error() {
    let model = new_model();
    let config = CString::new(r#"{"voxel_size": "big"}"#).unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { pt_tracker_new(model, PtHand::Right, ptr::null(), config.as_ptr(), &mut t) }, PtStatus::Config);
    assert!(t.is_null());
    unsafe { pt_model_free(model) };
}

#[test]
fn depth_reader_reads_what_was_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seq.bin");
    let cam = CameraIntrinsics::default();
    let frames = [render(Vec3::new(0.0, 0.0, 0.45)), render(Vec3::new(0.01, 0.0, 0.5))];
    let mut w = DepthSequenceWriter::new(std::fs::File::create(&path).unwrap(), cam, 30.0).unwrap();
    for f in &frames {
        w.write_frame(&phystrack::sensor::DepthImage { intrinsics: cam, depth: f.clone() }).unwrap();
    }
    w.finish().unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { pt_depth_reader_open(c_path.as_ptr(), &mut r) }, PtStatus::Ok, "{}", last_error());
    let (mut info, mut rate, mut count) = (intrinsics(), 0.0, 0u32);
    assert_eq!(unsafe { pt_depth_reader_info(r, &mut info, &mut rate, &mut count) }, PtStatus::Ok);
    let want = intrinsics();
    assert_eq!((info.width, info.height, info.fx, info.fy, info.cx, info.cy), (want.width, want.height, want.fx, want.fy, want.cx, want.cy));
    assert_eq!((rate, count), (30.0, 2));
    let mut buf = vec![0f32; (info.width * info.height) as usize];
    let mut has = 0;
    assert_eq!(unsafe { pt_depth_reader_next(r, buf.as_mut_ptr(), 10, &mut has) }, PtStatus::BufferTooSmall);
    for f in &frames {
        assert_eq!(unsafe { pt_depth_reader_next(r, buf.as_mut_ptr(), buf.len(), &mut has) }, PtStatus::Ok);
        assert_eq!(has, 1);
        assert_eq!(&buf, f);
    }
    assert_eq!(unsafe { pt_depth_reader_next(r, buf.as_mut_ptr(), buf.len(), &mut has) }, PtStatus::Ok);
    assert_eq!(has, 0);
    unsafe { pt_depth_reader_free(r) };

    let missing = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { pt_depth_reader_open(missing.as_ptr(), &mut r) }, PtStatus::Io);
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/phystrack.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["pt_tracker_step", "pt_depth_reader_next", "PT_STATUS_PANIC"] {
        assert!(text.contains(f), "{f}");
    }
    let Ok(out) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c", header]).output() else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
