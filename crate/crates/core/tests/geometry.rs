use phystrack::geometry::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_cube() -> ConvexPolyhedron {
    let mut v = Vec::new();
    for x in [-0.5, 0.5] {
        for y in [-0.5, 0.5] {
            for z in [-0.5, 0.5] {
                v.push(Vec3::new(x, y, z));
            }
        }
    }
    ConvexPolyhedron::from_points(&v).unwrap()
}

fn random_hull(rng: &mut ChaCha8Rng) -> ConvexPolyhedron {
    loop {
        let n = rng.gen_range(8..=20);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| Vec3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)))
            .collect();
        if let Ok(h) = ConvexPolyhedron::from_points(&pts) {
            if h.inscribed_radius() > 0.005 {
                return h;
            }
        }
    }
}

/// Dense barycentric samples of every face, fan-triangulated.
fn surface_samples(poly: &ConvexPolyhedron, n: usize) -> Vec<Vec3> {
    let v = poly.vertices();
    let mut out = Vec::new();
    for f in poly.faces() {
        for k in 1..f.ring.len() - 1 {
            let (a, b, c) = (v[f.ring[0]], v[f.ring[k]], v[f.ring[k + 1]]);
            for i in 0..=n {
                for j in 0..=n - i {
                    let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
                    out.push(a + (b - a) * s + (c - a) * t);
                }
            }
        }
    }
    out
}

fn planes_of(pts: &[Vec3]) -> Vec<(Vec3, f64)> {
    // Tetrahedron planes oriented away from the opposite vertex.
    (0..4)
        .map(|skip| {
            let f: Vec<Vec3> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
            let mut n = (f[1] - f[0]).cross(&(f[2] - f[0])).normalize();
            if n.dot(&(pts[skip] - f[0])) > 0.0 {
                n = -n;
            }
            (n, n.dot(&f[0]))
        })
        .collect()
}

#[test]
fn cube_basics() {
    let c = unit_cube();
    let cp = closest_point_on_body(&c, &RigidPose::identity(), &Vec3::new(2.0, 0.0, 0.0));
    assert!((cp.point - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
    assert!((cp.distance - 1.5).abs() < 1e-12);
    assert!((c.inscribed_radius() - 0.5).abs() < 1e-9);
    assert!(c.centroid().norm() < 1e-12);
    let at = closest_point_on_body(&c, &RigidPose::identity(), &c.centroid());
    assert_eq!(at.distance, 0.0);
    let moved = c.map_vertices(|p| p + Vec3::new(1.0, 2.0, 3.0), false).unwrap();
    assert!((moved.centroid() - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
}

#[test]
fn degenerate_hulls_are_rejected() {
    let flat: Vec<Vec3> = (0..6).map(|i| Vec3::new(i as f64, (i * i) as f64, 0.0)).collect();
    assert!(ConvexPolyhedron::from_points(&flat).is_err());
    assert!(ConvexPolyhedron::from_points(&flat[..3]).is_err());
    let mut nan = unit_cube().vertices().to_vec();
    nan[0].x = f64::NAN;
    assert!(ConvexPolyhedron::from_points(&nan).is_err());
}

#[test]
fn closest_point_matches_surface_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let h = random_hull(&mut rng);
        let samples = surface_samples(&h, 120);
        for _ in 0..100 {
            let q = Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
            let cp = h.closest_point_local(&q);
            assert!((cp.distance - (q - cp.point).norm()).abs() < 1e-12 || cp.distance == 0.0);
            if h.contains(&q, 0.0) {
                assert_eq!(cp.distance, 0.0);
                continue;
            }
            let oracle = samples.iter().map(|s| (q - s).norm()).fold(f64::INFINITY, f64::min);
            assert!((cp.distance - oracle).abs() < 1e-3, "{} vs {}", cp.distance, oracle);
            assert!(cp.distance <= oracle + 1e-12);
            // Returned point is on the surface of its face.
            let f = &h.faces()[cp.face];
            assert!((f.normal.dot(&cp.point) - f.offset).abs() < 1e-9);
        }
    }
}

#[test]
fn tetrahedron_inscribed_radius_matches_grid_search() {
    let s = 1.0 / 2f64.sqrt();
    let pts = [Vec3::new(s, 0.0, -0.5), Vec3::new(-s, 0.0, -0.5), Vec3::new(0.0, s, 0.5), Vec3::new(0.0, -s, 0.5)];
    // Rescale to edge length 1.
    let edge = (pts[0] - pts[1]).norm();
    let pts = pts.map(|p| p / edge);
    let tet = ConvexPolyhedron::from_points(&pts).unwrap();
    let planes = planes_of(&pts);
    let depth = |x: &Vec3| planes.iter().map(|(n, d)| d - n.dot(x)).fold(f64::INFINITY, f64::min);
    let (mut center, mut half) = (Vec3::zeros(), 1.0);
    for _ in 0..30 {
        let mut best = (f64::NEG_INFINITY, center);
        for i in -4..=4 {
            for j in -4..=4 {
                for k in -4..=4 {
                    let x = center + Vec3::new(i as f64, j as f64, k as f64) * (half / 4.0);
                    let d = depth(&x);
                    if d > best.0 {
                        best = (d, x);
                    }
                }
            }
        }
        center = best.1;
        half *= 0.5;
    }
    let oracle = depth(&center);
    assert!((oracle - 0.20412).abs() < 1e-5);
    assert!((tet.inscribed_radius() - oracle).abs() < 1e-7);
}

#[test]
fn centroid_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let h = random_hull(&mut rng);
        let (mut sum, mut n) = (Vec3::zeros(), 0usize);
        while n < 200_000 {
            let q = Vec3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
            if h.contains(&q, 0.0) {
                sum += q;
                n += 1;
            }
        }
        let mc = sum / n as f64;
        assert!((h.centroid() - mc).norm() < 1e-3);
        let m = h.mass_properties(1000.0);
        assert!((m.mass - 1000.0 * h.volume()).abs() < 1e-12);
    }
}

#[test]
fn cube_inertia_is_analytic() {
    let m = unit_cube().mass_properties(2.0);
    assert!((m.mass - 2.0).abs() < 1e-12);
    let i = m.mass / 6.0;
    assert!((m.inertia - Mat3::identity() * i).norm() < 1e-12);
}

fn arb_hull() -> impl Strategy<Value = ConvexPolyhedron> {
    any::<u64>().prop_map(|s| random_hull(&mut ChaCha8Rng::seed_from_u64(s)))
}

fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn arb_pose() -> impl Strategy<Value = RigidPose> {
    (arb_vec(1.0), arb_vec(3.0)).prop_map(|(t, r)| pose(t, UnitQuaternion::from_scaled_axis(r)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_one_lipschitz(h in arb_hull(), a in arb_vec(0.15), b in arb_vec(0.15)) {
        let da = h.closest_point_local(&a).distance;
        let db = h.closest_point_local(&b).distance;
        prop_assert!((da - db).abs() <= (a - b).norm() + 1e-12);
    }

    #[test]
    fn closest_point_is_pose_equivariant(h in arb_hull(), q in arb_vec(0.15), p in arb_pose()) {
        let local = h.closest_point_local(&q);
        let world = closest_point_on_body(&h, &p, &transform_point(&p, &q));
        prop_assert!((world.distance - local.distance).abs() < 1e-9);
        prop_assert!((world.point - transform_point(&p, &local.point)).norm() < 1e-9);
        prop_assert_eq!(world.face, local.face);
    }

    #[test]
    fn chebyshev_center_clears_every_face(h in arb_hull()) {
        let c = h.chebyshev_center();
        for f in h.faces() {
            prop_assert!(f.offset - f.normal.dot(&c) >= h.inscribed_radius() - 1e-6);
        }
        prop_assert!(h.inscribed_radius() > 0.0);
    }

    #[test]
    fn centroid_is_strictly_inside(h in arb_hull()) {
        prop_assert!(h.max_plane_distance(&h.centroid()).0 < 0.0);
    }

    #[test]
    fn radius_scales_linearly(h in arb_hull(), s in 0.2..5.0f64) {
        let scaled = h.map_vertices(|p| p * s, false).unwrap();
        prop_assert!((scaled.inscribed_radius() - s * h.inscribed_radius()).abs() < 1e-9 * s.max(1.0));
        prop_assert!((scaled.centroid() - h.centroid() * s).norm() < 1e-9 * s.max(1.0));
    }

    #[test]
    fn hull_faces_bound_every_vertex(h in arb_hull()) {
        for f in h.faces() {
            prop_assert!((f.normal.norm() - 1.0).abs() < 1e-9);
            for v in h.vertices() {
                prop_assert!(f.normal.dot(v) - f.offset <= 1e-6);
            }
        }
        prop_assert!(h.vertices().len() >= 4 && h.faces().len() >= 4);
    }
}
