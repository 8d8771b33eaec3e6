//! Single-body registration: a free hull is pulled onto surface samples of
//! a displaced copy of itself, one assign/constrain/step cycle per frame.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binding::{assign_points, make_surface_constraints, posed_hulls, surface_cap, DEFAULT_MAX_SPEED};
use crate::dynamics::{step_world, BodySet, RigidBody, SolverConfig};
use crate::geometry::{pose, transform_point, ConvexPolyhedron, RigidPose, UnitQuaternion, Vec3};
use crate::sensor::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationConfig {
    pub seed: u64,
    pub points: usize,
    /// Extra points, as a fraction of `points`, drawn uniformly in a box
    /// of side `outlier_box` around the true centroid.
    pub outlier_fraction: f64,
    pub outlier_box: f64,
    pub max_translation: f64,
    pub max_rotation: f64,
    pub frames: usize,
    pub solver: SolverConfig,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            points: 200,
            outlier_fraction: 0.0,
            outlier_box: 0.1,
            max_translation: 0.02,
            max_rotation: 15f64.to_radians(),
            frames: 30,
            // At 16 sweeps a capped outlier can leave a truncation fixed
            // point some microns off; 32 settles to round-off.
            solver: SolverConfig { iterations: 32, ..SolverConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationOutcome {
    /// Centroid error after each frame, m.
    pub translation_error: Vec<f64>,
    /// Orientation error after each frame, rad.
    pub rotation_error: Vec<f64>,
}

impl RegistrationOutcome {
    /// First frame (1-based) after which both errors are within bounds.
    pub fn frames_to_converge(&self, translation: f64, rotation: f64) -> Option<usize> {
        self.translation_error
            .iter()
            .zip(&self.rotation_error)
            .position(|(&t, &r)| t <= translation && r <= rotation)
            .map(|k| k + 1)
    }

    pub fn final_translation_error(&self) -> f64 {
        self.translation_error.last().copied().unwrap_or(0.0)
    }

    pub fn final_rotation_error(&self) -> f64 {
        self.rotation_error.last().copied().unwrap_or(0.0)
    }
}

/// An irregular block (one corner cut) so no symmetry hides the answer.
pub fn registration_hull() -> ConvexPolyhedron {
    let mut pts = Vec::new();
    for x in [-0.03, 0.03] {
        for y in [-0.02, 0.02] {
            for z in [-0.015, 0.015] {
                if (x, y, z) != (0.03, 0.02, -0.015) {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
    }
    pts.extend([Vec3::new(0.03, 0.02, -0.003), Vec3::new(0.03, 0.008, -0.015), Vec3::new(0.016, 0.02, -0.015)]);
    ConvexPolyhedron::from_points(&pts).expect("valid block")
}

/// Area-weighted uniform samples of the faces visible from the origin.
pub fn sample_visible_surface(hull: &ConvexPolyhedron, at: &RigidPose, n: usize, rng: &mut impl Rng) -> Vec<Vec3> {
    let cam = at.inverse_transform_point(&nalgebra::Point3::origin()).coords;
    let v = hull.vertices();
    let mut tris = Vec::new();
    let mut total = 0.0;
    for f in hull.faces().iter().filter(|f| f.normal.dot(&cam) > f.offset) {
        for k in 1..f.ring.len() - 1 {
            let (a, b, c) = (v[f.ring[0]], v[f.ring[k]], v[f.ring[k + 1]]);
            total += (b - a).cross(&(c - a)).norm() * 0.5;
            tris.push((total, a, b, c));
        }
    }
    (0..n)
        .map(|_| {
            let pick = rng.gen_range(0.0..total);
            let (_, a, b, c) = tris[tris.partition_point(|t| t.0 < pick).min(tris.len() - 1)];
            let (mut s, mut t): (f64, f64) = (rng.gen(), rng.gen());
            if s + t > 1.0 {
                s = 1.0 - s;
                t = 1.0 - t;
            }
            transform_point(at, &(a + (b - a) * s + (c - a) * t))
        })
        .collect()
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn run_registration(cfg: &RegistrationConfig) -> RegistrationOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hull = Arc::new(registration_hull());
    let truth = pose(Vec3::new(0.01, -0.02, 0.45), UnitQuaternion::from_euler_angles(0.5, -0.6, 0.3));
    let mut points = sample_visible_surface(&hull, &truth, cfg.points, &mut rng);
    let center = transform_point(&truth, &hull.centroid());
    let outliers = (cfg.points as f64 * cfg.outlier_fraction).round() as usize;
    let h = cfg.outlier_box * 0.5;
    for _ in 0..outliers {
        points.push(center + Vec3::new(rng.gen_range(-h..h), rng.gen_range(-h..h), rng.gen_range(-h..h)));
    }
    let cloud = PointCloud::new(points);

    // Displacement about the centroid: uniform in the translation ball and
    // in rotation angle.
    let offset = random_unit(&mut rng) * cfg.max_translation * rng.gen::<f64>().cbrt();
    let turn = UnitQuaternion::from_scaled_axis(random_unit(&mut rng) * cfg.max_rotation * rng.gen::<f64>());
    let start_rot = turn * truth.rotation;
    let start_center = center + offset;
    let start = RigidPose::from_parts((start_center - start_rot * hull.centroid()).into(), start_rot);

    let mass = hull.volume() * 1000.0;
    let body = RigidBody::new(hull.clone(), mass, start).expect("valid body");
    let mut world = BodySet::new(vec![body]);
    let cap = surface_cap(mass, cloud.len(), DEFAULT_MAX_SPEED);
    let mut out = RegistrationOutcome { translation_error: Vec::new(), rotation_error: Vec::new() };
    for _ in 0..cfg.frames {
        let assignments = assign_points(&cloud, &posed_hulls(&world));
        let constraints = make_surface_constraints(&assignments, cap);
        step_world(&mut world, &constraints, &cfg.solver).expect("valid constraints");
        let p = world.bodies()[0].pose;
        out.translation_error.push((transform_point(&p, &hull.centroid()) - center).norm());
        out.rotation_error.push(p.rotation.angle_to(&truth.rotation));
    }
    out
}
