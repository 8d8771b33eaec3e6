//! Depth sequence files and ground-truth sidecars.
//!
//! Depth sequence layout, all little-endian:
//!
//! ```text
//! magic      4 bytes  "PTDS"
//! version    u32      1
//! width      u32
//! height     u32
//! fx fy cx cy f64 x 4
//! frames     u32
//! frame_rate f64
//! then `frames` blocks of width*height f32 depths in meters, 0 = no return
//! ```

use std::io::{self, Read, Seek, SeekFrom, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CameraIntrinsics, DepthImage, BACKGROUND};
use crate::geometry::{RigidPose, UnitQuaternion, Vec3};

const MAGIC: &[u8; 4] = b"PTDS";
const VERSION: u32 = 1;
const FRAME_COUNT_OFFSET: u64 = 4 + 4 + 4 + 4 + 8 * 4;

#[derive(Debug, Error)]
pub enum SensorIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a depth sequence file")]
    BadMagic,
    #[error("unsupported depth sequence version {0}")]
    Version(u32),
    #[error("corrupt depth sequence: {0}")]
    Corrupt(String),
}

/// Streams frames into a depth sequence; the frame count in the header is
/// patched by [`finish`](Self::finish).
pub struct DepthSequenceWriter<W: Write + Seek> {
    out: W,
    intrinsics: CameraIntrinsics,
    frames: u32,
}

impl<W: Write + Seek> DepthSequenceWriter<W> {
    pub fn new(mut out: W, intrinsics: CameraIntrinsics, frame_rate: f64) -> Result<Self, SensorIoError> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(intrinsics.width as u32).to_le_bytes())?;
        out.write_all(&(intrinsics.height as u32).to_le_bytes())?;
        for x in [intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy] {
            out.write_all(&x.to_le_bytes())?;
        }
        out.write_all(&0u32.to_le_bytes())?;
        out.write_all(&frame_rate.to_le_bytes())?;
        Ok(Self { out, intrinsics, frames: 0 })
    }

    pub fn write_frame(&mut self, image: &DepthImage) -> Result<(), SensorIoError> {
        if image.width() != self.intrinsics.width || image.height() != self.intrinsics.height {
            return Err(SensorIoError::Corrupt("frame size differs from header".into()));
        }
        let mut buf = Vec::with_capacity(image.depth.len() * 4);
        for d in &image.depth {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        self.out.write_all(&buf)?;
        self.frames += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, SensorIoError> {
        let end = self.out.stream_position()?;
        self.out.seek(SeekFrom::Start(FRAME_COUNT_OFFSET))?;
        self.out.write_all(&self.frames.to_le_bytes())?;
        self.out.seek(SeekFrom::Start(end))?;
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads a depth sequence frame by frame. The file carries no clip range,
/// so images report `near = 1e-3` and `far = 1e3`.
pub struct DepthSequenceReader<R: Read> {
    input: R,
    pub intrinsics: CameraIntrinsics,
    pub frame_count: u32,
    pub frame_rate: f64,
    read: u32,
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

impl<R: Read> DepthSequenceReader<R> {
    pub fn new(mut input: R) -> Result<Self, SensorIoError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SensorIoError::BadMagic);
        }
        let version = read_u32(&mut input)?;
        if version != VERSION {
            return Err(SensorIoError::Version(version));
        }
        let width = read_u32(&mut input)? as usize;
        let height = read_u32(&mut input)? as usize;
        let fx = read_f64(&mut input)?;
        let fy = read_f64(&mut input)?;
        let cx = read_f64(&mut input)?;
        let cy = read_f64(&mut input)?;
        let frame_count = read_u32(&mut input)?;
        let frame_rate = read_f64(&mut input)?;
        let intrinsics = CameraIntrinsics { width, height, fx, fy, cx, cy, near: 1e-3, far: 1e3 };
        intrinsics.validate().map_err(|e| SensorIoError::Corrupt(e.to_string()))?;
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(SensorIoError::Corrupt("frame rate must be positive".into()));
        }
        Ok(Self { input, intrinsics, frame_count, frame_rate, read: 0 })
    }

    /// Next frame, or `None` after the last one.
    pub fn next_frame(&mut self) -> Result<Option<DepthImage>, SensorIoError> {
        if self.read >= self.frame_count {
            return Ok(None);
        }
        let n = self.intrinsics.width * self.intrinsics.height;
        let mut buf = vec![0u8; n * 4];
        self.input.read_exact(&mut buf)?;
        let mut depth = Vec::with_capacity(n);
        for c in buf.chunks_exact(4) {
            let d = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if !(d.is_finite() && d >= 0.0) {
                return Err(SensorIoError::Corrupt(format!("invalid depth {d} in frame {}", self.read)));
            }
            depth.push(if d == 0.0 { BACKGROUND } else { d });
        }
        self.read += 1;
        Ok(Some(DepthImage { intrinsics: self.intrinsics, depth }))
    }
}

/// Reads a whole depth sequence into memory.
pub fn read_depth_sequence<R: Read>(input: R) -> Result<(f64, Vec<DepthImage>), SensorIoError> {
    let mut r = DepthSequenceReader::new(input)?;
    let mut frames = Vec::with_capacity(r.frame_count as usize);
    while let Some(f) = r.next_frame()? {
        frames.push(f);
    }
    Ok((r.frame_rate, frames))
}

/// Per-frame body poses written next to a depth sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema: String,
    pub model: String,
    pub bodies: Vec<String>,
    pub frame_rate: f64,
    pub frames: Vec<GroundTruthFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub frame: usize,
    /// Per body: translation x, y, z then rotation w, x, y, z.
    pub poses: Vec<[f64; 7]>,
}

impl GroundTruth {
    pub const SCHEMA: &'static str = "phystrack.truth/1";

    pub fn encode_pose(p: &RigidPose) -> [f64; 7] {
        let t = p.translation.vector;
        let q = p.rotation;
        [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
    }

    pub fn decode_pose(a: &[f64; 7]) -> RigidPose {
        let q = UnitQuaternion::new_normalize(nalgebra::Quaternion::new(a[3], a[4], a[5], a[6]));
        RigidPose::from_parts(Vec3::new(a[0], a[1], a[2]).into(), q)
    }
}
