use super::{CameraIntrinsics, DepthImage, BACKGROUND};
use crate::geometry::{transform_point, ConvexPolyhedron, RigidPose, Vec3};

/// Pixel coordinates of a camera-frame point, or `None` behind the camera.
#[inline]
pub fn project(cam: &CameraIntrinsics, p: &Vec3) -> Option<(f64, f64)> {
    if p.z <= 0.0 {
        return None;
    }
    Some((cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy))
}

/// Ray-casts posed hulls. Each pixel keeps the nearest entry depth inside
/// `[near, far]`.
pub fn render_depth(bodies: &[(&ConvexPolyhedron, RigidPose)], camera: &CameraIntrinsics) -> DepthImage {
    let mut img = DepthImage::blank(*camera);
    render_depth_into(&mut img, bodies);
    img
}

/// Like [`render_depth`] but draws over an existing image.
pub fn render_depth_into(img: &mut DepthImage, bodies: &[(&ConvexPolyhedron, RigidPose)]) {
    let cam = img.intrinsics;
    let mut planes: Vec<(Vec3, f64)> = Vec::new();
    for (poly, pose) in bodies {
        planes.clear();
        for f in poly.faces() {
            let n = pose.rotation * f.normal;
            planes.push((n, f.offset + n.dot(&pose.translation.vector)));
        }
        let Some((u0, u1, v0, v1)) = pixel_bounds(poly, pose, &cam) else { continue };
        for v in v0..=v1 {
            let ry = (v as f64 - cam.cy) / cam.fy;
            for u in u0..=u1 {
                let ray = Vec3::new((u as f64 - cam.cx) / cam.fx, ry, 1.0);
                let Some(t) = entry_depth(&planes, &ray) else { continue };
                if t < cam.near || t > cam.far {
                    continue;
                }
                let idx = v * cam.width + u;
                let t32 = t as f32;
                let cur = img.depth[idx];
                if cur == BACKGROUND || t32 < cur {
                    img.depth[idx] = t32;
                }
            }
        }
    }
}

/// Entry parameter of the ray `t * ray` into the half-space intersection
/// `n . x <= d`. Since `ray.z == 1` the parameter equals depth.
#[inline]
fn entry_depth(planes: &[(Vec3, f64)], ray: &Vec3) -> Option<f64> {
    let mut enter = 0.0f64;
    let mut exit = f64::INFINITY;
    for (n, d) in planes {
        let nr = n.dot(ray);
        if nr < 0.0 {
            enter = enter.max(d / nr);
        } else if nr > 0.0 {
            exit = exit.min(d / nr);
        } else if *d < 0.0 {
            return None;
        }
        if enter > exit {
            return None;
        }
    }
    (enter > 0.0).then_some(enter)
}

fn pixel_bounds(poly: &ConvexPolyhedron, pose: &RigidPose, cam: &CameraIntrinsics) -> Option<(usize, usize, usize, usize)> {
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut all_behind = true;
    for v in poly.vertices() {
        let p = transform_point(pose, v);
        if p.z <= 1e-9 {
            // Part of the hull is behind the camera; its projection is
            // unbounded, so scan the whole image.
            umin = f64::NEG_INFINITY;
            umax = f64::INFINITY;
            vmin = f64::NEG_INFINITY;
            vmax = f64::INFINITY;
            continue;
        }
        all_behind = false;
        let (u, w) = project(cam, &p).expect("z > 0");
        umin = umin.min(u);
        umax = umax.max(u);
        vmin = vmin.min(w);
        vmax = vmax.max(w);
    }
    if all_behind {
        return None;
    }
    let clamp = |x: f64, hi: usize| x.clamp(0.0, hi as f64) as usize;
    if umax < 0.0 || vmax < 0.0 || umin > (cam.width - 1) as f64 || vmin > (cam.height - 1) as f64 {
        return None;
    }
    Some((
        clamp(umin.floor(), cam.width - 1),
        clamp(umax.ceil(), cam.width - 1),
        clamp(vmin.floor(), cam.height - 1),
        clamp(vmax.ceil(), cam.height - 1),
    ))
}
