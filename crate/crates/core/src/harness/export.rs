use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::scenario::{Scenario, SyntheticCamera};
use super::run::Trace;
use super::HarnessError;
use crate::geometry::{transform_point, RigidPose};
use crate::model::ArticulatedModel;
use crate::sensor::{project, CameraIntrinsics, DepthImage, GroundTruth, BACKGROUND};

pub type PixelSegment = ((f64, f64), (f64, f64));

const WIRE: Rgb<u8> = Rgb([0, 230, 0]);

/// Projected hull edges of a posed model; edges with an endpoint behind
/// the camera are dropped.
pub fn overlay_edges(model: &ArticulatedModel, poses: &[RigidPose], camera: &CameraIntrinsics) -> Vec<PixelSegment> {
    let mut out = Vec::new();
    for (body, pose) in model.bodies.iter().zip(poses) {
        let verts: Vec<Option<(f64, f64)>> =
            body.shape.vertices().iter().map(|v| project(camera, &transform_point(pose, v))).collect();
        let mut edges = BTreeSet::new();
        for ring in body.shape.face_rings() {
            for k in 0..ring.len() {
                let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        for (a, b) in edges {
            if let (Some(pa), Some(pb)) = (verts[a], verts[b]) {
                out.push((pa, pb));
            }
        }
    }
    out
}

/// Depth as grayscale (near is bright, no return is black) with the
/// segments drawn on top.
pub fn render_still(image: &DepthImage, segments: &[PixelSegment]) -> RgbImage {
    let (w, h) = (image.width(), image.height());
    let fg = image.depth.iter().copied().filter(|&d| d != BACKGROUND);
    let (lo, hi) = fg.fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let span = (hi - lo).max(1e-6);
    let mut img = RgbImage::new(w as u32, h as u32);
    for v in 0..h {
        for u in 0..w {
            let d = image.get(u, v);
            let g = if d == BACKGROUND { 0 } else { (255.0 - 191.0 * (d - lo) / span).round() as u8 };
            img.put_pixel(u as u32, v as u32, Rgb([g, g, g]));
        }
    }
    for &((u0, v0), (u1, v1)) in segments {
        let steps = (u1 - u0).abs().max((v1 - v0).abs()).ceil().clamp(1.0, 4096.0) as usize;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let (u, v) = ((u0 + (u1 - u0) * t).round(), (v0 + (v1 - v0) * t).round());
            if u >= 0.0 && v >= 0.0 && (u as usize) < w && (v as usize) < h {
                img.put_pixel(u as u32, v as u32, WIRE);
            }
        }
    }
    img
}

/// Replays the scenario's images and writes every `every_n`-th frame of
/// the trace, overlaid with the tracked wireframe, as `frame_%06d.png`.
pub fn export_frames(trace: &Trace, scenario: &Scenario, every_n: usize, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if every_n == 0 {
        return Err(HarnessError::Config("every-n must be at least 1".into()));
    }
    if trace.scenario != scenario.name || trace.seed != scenario.seed {
        return Err(HarnessError::Config(format!(
            "trace is for {} seed {}, scenario is {} seed {}",
            trace.scenario, trace.seed, scenario.name, scenario.seed
        )));
    }
    if trace.frames.len() > scenario.frame_count() || trace.frames.iter().any(|f| f.hands.len() != scenario.hands.len()) {
        return Err(HarnessError::Config("trace does not match the scenario's frames or hands".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut camera = SyntheticCamera::new(scenario)?;
    let models = camera.models().to_vec();
    let mut written = Vec::new();
    for record in &trace.frames {
        let Some(frame) = camera.next_frame()? else { break };
        if record.frame % every_n != 0 {
            continue;
        }
        let mut segments = Vec::new();
        for (model, hand) in models.iter().zip(&record.hands) {
            let poses: Vec<RigidPose> = hand.best.iter().map(GroundTruth::decode_pose).collect();
            segments.extend(overlay_edges(model, &poses, &scenario.camera));
        }
        let path = out_dir.join(format!("frame_{:06}.png", record.frame));
        render_still(&frame.image, &segments).save(&path).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
