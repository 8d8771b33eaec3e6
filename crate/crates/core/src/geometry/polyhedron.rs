use super::lp::{maximize, LpOutcome};
use super::{
    convex_hull, inverse_transform_point, transform_point, GeometryError, Mat3, RigidPose, Vec3,
    GEOM_EPS,
};

/// A planar polygonal face with outward unit normal; the face plane is
/// `normal · x = offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub ring: Vec<usize>,
    pub normal: Vec3,
    pub offset: f64,
}

/// Result of a point-versus-hull query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    /// Nearest point on the hull surface.
    pub point: Vec3,
    /// Face containing `point` (lowest index on ties).
    pub face: usize,
    /// Euclidean distance from the query to the hull; zero for interior queries.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub mass: f64,
    /// Center of mass in the hull's own frame.
    pub center_of_mass: Vec3,
    /// Inertia tensor about the center of mass, hull frame axes.
    pub inertia: Mat3,
}

/// Validated convex hull with cached volume centroid and inscribed sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolyhedron {
    vertices: Vec<Vec3>,
    faces: Vec<Face>,
    volume: f64,
    centroid: Vec3,
    chebyshev_center: Vec3,
    inscribed_radius: f64,
    bounding_radius: f64,
}

impl ConvexPolyhedron {
    /// Convex hull of an arbitrary point set.
    pub fn from_points(points: &[Vec3]) -> Result<Self, GeometryError> {
        let (vertices, rings) = convex_hull(points)?;
        Self::from_faces(vertices, rings)
    }

    /// Builds a polyhedron from explicit faces and checks planarity,
    /// orientation and convexity against [`GEOM_EPS`].
    pub fn from_faces(vertices: Vec<Vec3>, rings: Vec<Vec<usize>>) -> Result<Self, GeometryError> {
        if vertices.len() < 4 || rings.len() < 4 {
            return Err(GeometryError::TooSmall { vertices: vertices.len(), faces: rings.len() });
        }
        if let Some(i) = vertices.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite(i));
        }
        let mut faces = Vec::with_capacity(rings.len());
        for (fi, ring) in rings.into_iter().enumerate() {
            if ring.len() < 3 {
                return Err(GeometryError::Degenerate(format!("face {fi} has fewer than 3 vertices")));
            }
            if let Some(&v) = ring.iter().find(|&&v| v >= vertices.len()) {
                return Err(GeometryError::BadIndex { face: fi, vertex: v });
            }
            // Newell's method is robust for slightly non-planar rings.
            let mut n = Vec3::zeros();
            for k in 0..ring.len() {
                let a = vertices[ring[k]];
                let b = vertices[ring[(k + 1) % ring.len()]];
                n += a.cross(&b);
            }
            let len = n.norm();
            if len <= 1e-18 {
                return Err(GeometryError::Degenerate(format!("face {fi} has zero area")));
            }
            let normal = n / len;
            let offset = ring.iter().map(|&v| normal.dot(&vertices[v])).sum::<f64>() / ring.len() as f64;
            for &v in &ring {
                let off = normal.dot(&vertices[v]) - offset;
                if off.abs() > GEOM_EPS {
                    return Err(GeometryError::NonPlanar { face: fi, vertex: v, offset: off });
                }
            }
            faces.push(Face { ring, normal, offset });
        }
        for (fi, f) in faces.iter().enumerate() {
            for (vi, v) in vertices.iter().enumerate() {
                let excess = f.normal.dot(v) - f.offset;
                if excess > GEOM_EPS {
                    return Err(GeometryError::NonConvex { face: fi, vertex: vi, excess });
                }
            }
        }

        let (volume, centroid) = volume_centroid(&vertices, &faces)?;
        let (chebyshev_center, inscribed_radius) = chebyshev_center(&faces, &centroid)?;
        let bounding_radius =
            vertices.iter().map(|v| (v - centroid).norm()).fold(0.0, f64::max);
        Ok(Self { vertices, faces, volume, centroid, chebyshev_center, inscribed_radius, bounding_radius })
    }

    /// Applies `f` to every vertex and rebuilds the hull with the same face
    /// rings. Set `reverse_rings` for orientation-reversing maps such as
    /// mirroring.
    pub fn map_vertices(
        &self,
        f: impl Fn(&Vec3) -> Vec3,
        reverse_rings: bool,
    ) -> Result<Self, GeometryError> {
        let vertices = self.vertices.iter().map(f).collect();
        let rings = self
            .faces
            .iter()
            .map(|fc| {
                let mut r = fc.ring.clone();
                if reverse_rings {
                    r.reverse();
                }
                r
            })
            .collect();
        Self::from_faces(vertices, rings)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face_rings(&self) -> Vec<Vec<usize>> {
        self.faces.iter().map(|f| f.ring.clone()).collect()
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Volume centroid, hull frame.
    pub fn centroid(&self) -> Vec3 {
        self.centroid
    }

    /// Center of the largest inscribed sphere.
    pub fn chebyshev_center(&self) -> Vec3 {
        self.chebyshev_center
    }

    /// Radius of the largest inscribed sphere.
    pub fn inscribed_radius(&self) -> f64 {
        self.inscribed_radius
    }

    /// Largest vertex distance from the centroid.
    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    /// Maximum signed plane distance. Negative inside (minus the depth to
    /// the nearest face plane), and a lower bound on the true distance
    /// outside.
    pub fn max_plane_distance(&self, q: &Vec3) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut face = 0;
        for (i, f) in self.faces.iter().enumerate() {
            let h = f.normal.dot(q) - f.offset;
            if h > best {
                best = h;
                face = i;
            }
        }
        (best, face)
    }

    /// Closest surface point to a query in the hull frame.
    pub fn closest_point_local(&self, q: &Vec3) -> ClosestPoint {
        self.closest_point_within(q, f64::INFINITY)
            .expect("unbounded query always resolves")
    }

    /// Like [`closest_point_local`](Self::closest_point_local) but returns
    /// `None` early when the distance provably exceeds `bound`.
    pub fn closest_point_within(&self, q: &Vec3, bound: f64) -> Option<ClosestPoint> {
        let (max_h, max_face) = self.max_plane_distance(q);
        if max_h <= 0.0 {
            let f = &self.faces[max_face];
            return Some(ClosestPoint { point: q - f.normal * max_h, face: max_face, distance: 0.0 });
        }
        if max_h > bound {
            return None;
        }
        let mut best = ClosestPoint { point: *q, face: usize::MAX, distance: f64::INFINITY };
        for (i, f) in self.faces.iter().enumerate() {
            let h = f.normal.dot(q) - f.offset;
            if h <= 0.0 || h >= best.distance {
                continue;
            }
            let (p, d) = self.closest_on_face(i, q);
            if d < best.distance - 1e-12 {
                best = ClosestPoint { point: p, face: i, distance: d };
            }
        }
        if best.distance > bound {
            None
        } else {
            Some(best)
        }
    }

    /// Closest point restricted to faces accepted by `eligible`. Interior
    /// queries are measured to the face itself, so the returned distance is
    /// always `|q - point|`. Returns `None` if no face is eligible.
    pub fn closest_point_on_faces(
        &self,
        q: &Vec3,
        eligible: impl Fn(usize) -> bool,
    ) -> Option<ClosestPoint> {
        let mut best: Option<ClosestPoint> = None;
        for i in 0..self.faces.len() {
            if !eligible(i) {
                continue;
            }
            let h = self.faces[i].normal.dot(q) - self.faces[i].offset;
            if let Some(b) = &best {
                if h.abs() >= b.distance {
                    continue;
                }
            }
            let (p, d) = self.closest_on_face(i, q);
            if best.map_or(true, |b| d < b.distance - 1e-12) {
                best = Some(ClosestPoint { point: p, face: i, distance: d });
            }
        }
        best
    }

    /// Closest point on a single face polygon.
    pub fn closest_on_face(&self, face: usize, q: &Vec3) -> (Vec3, f64) {
        let f = &self.faces[face];
        let h = f.normal.dot(q) - f.offset;
        let p = q - f.normal * h;
        let ring = &f.ring;
        let n = ring.len();
        let mut inside = true;
        for k in 0..n {
            let a = self.vertices[ring[k]];
            let b = self.vertices[ring[(k + 1) % n]];
            if (b - a).cross(&(p - a)).dot(&f.normal) < 0.0 {
                inside = false;
                break;
            }
        }
        if inside {
            return (p, h.abs());
        }
        let mut best = (p, f64::INFINITY);
        for k in 0..n {
            let a = self.vertices[ring[k]];
            let b = self.vertices[ring[(k + 1) % n]];
            let c = closest_on_segment(&a, &b, q);
            let d = (q - c).norm();
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }

    /// True when every face plane is satisfied within `tol`.
    pub fn contains(&self, q: &Vec3, tol: f64) -> bool {
        self.max_plane_distance(q).0 <= tol
    }

    /// Mass, center of mass and inertia for uniform `density`.
    pub fn mass_properties(&self, density: f64) -> MassProperties {
        // Covariance of a canonical tetrahedron (0, e1, e2, e3).
        let canon = Mat3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0) / 120.0;
        let origin = self.centroid;
        let mut cov = Mat3::zeros();
        let mut vol = 0.0;
        for f in &self.faces {
            let v0 = self.vertices[f.ring[0]] - origin;
            for k in 1..f.ring.len() - 1 {
                let v1 = self.vertices[f.ring[k]] - origin;
                let v2 = self.vertices[f.ring[k + 1]] - origin;
                let a = Mat3::from_columns(&[v0, v1, v2]);
                let det = a.determinant();
                cov += a * canon * a.transpose() * det;
                vol += det / 6.0;
            }
        }
        // The expansion point is the centroid, so no parallel-axis shift.
        let inertia = (Mat3::identity() * cov.trace() - cov) * density;
        MassProperties { mass: vol * density, center_of_mass: self.centroid, inertia }
    }
}

/// Closest point on a posed hull, in world coordinates.
pub fn closest_point_on_body(poly: &ConvexPolyhedron, pose: &RigidPose, query: &Vec3) -> ClosestPoint {
    let local = inverse_transform_point(pose, query);
    let cp = poly.closest_point_local(&local);
    ClosestPoint { point: transform_point(pose, &cp.point), ..cp }
}

pub(crate) fn closest_on_segment(a: &Vec3, b: &Vec3, q: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return *a;
    }
    let t = ((q - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

fn volume_centroid(vertices: &[Vec3], faces: &[Face]) -> Result<(f64, Vec3), GeometryError> {
    let reference = vertices.iter().sum::<Vec3>() / vertices.len() as f64;
    let mut vol = 0.0;
    let mut moment = Vec3::zeros();
    for f in faces {
        let a = vertices[f.ring[0]];
        for k in 1..f.ring.len() - 1 {
            let b = vertices[f.ring[k]];
            let c = vertices[f.ring[k + 1]];
            let v = (a - reference).dot(&(b - reference).cross(&(c - reference))) / 6.0;
            vol += v;
            moment += (reference + a + b + c) / 4.0 * v;
        }
    }
    let scale = vertices.iter().map(|v| (v - reference).norm()).fold(0.0, f64::max);
    if !(vol > 1e-12 * scale.powi(3)) || vol <= 0.0 {
        return Err(GeometryError::Degenerate(format!("volume {vol:.3e} is not positive")));
    }
    Ok((vol, moment / vol))
}

/// Chebyshev center via a small LP in (center, radius).
///
/// The center is written as `interior + u - w` with `u, w >= 0`; shifting
/// by an interior point makes the all-zero start feasible.
fn chebyshev_center(faces: &[Face], interior: &Vec3) -> Result<(Vec3, f64), GeometryError> {
    let mut a = Vec::with_capacity(faces.len());
    let mut b = Vec::with_capacity(faces.len());
    for f in faces {
        let n = f.normal;
        a.push(vec![n.x, n.y, n.z, -n.x, -n.y, -n.z, 1.0]);
        b.push((f.offset - n.dot(interior)).max(0.0));
    }
    let c = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    match maximize(&c, &a, &b) {
        LpOutcome::Optimal { x, value } => {
            if value <= 1e-12 {
                return Err(GeometryError::Degenerate("inscribed radius is zero".into()));
            }
            let center = interior + Vec3::new(x[0] - x[3], x[1] - x[4], x[2] - x[5]);
            Ok((center, value))
        }
        LpOutcome::Unbounded => Err(GeometryError::Degenerate("hull is unbounded".into())),
    }
}
