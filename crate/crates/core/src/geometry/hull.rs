//! Incremental 3D convex hull.
//!
//! Quadratic in the number of points, which is fine for the 8-40 vertex
//! hulls used for bones. Coplanar triangles are merged into polygonal faces
//! so a box comes out with six quads rather than twelve triangles.

use std::collections::{BTreeMap, HashSet};

use super::{GeometryError, Vec3};

#[derive(Clone, Copy)]
struct Tri {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
}

impl Tri {
    fn new(points: &[Vec3], a: usize, b: usize, c: usize) -> Self {
        let n = (points[b] - points[a]).cross(&(points[c] - points[a]));
        let normal = n.normalize();
        Tri { v: [a, b, c], normal, offset: normal.dot(&points[a]) }
    }

    fn height(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Computes the convex hull of `points`.
///
/// Returns the hull vertices (a subset of the input, in input order) and one
/// counter-clockwise (seen from outside) index ring per face.
pub fn convex_hull(points: &[Vec3]) -> Result<(Vec<Vec3>, Vec<Vec<usize>>), GeometryError> {
    if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(GeometryError::NonFinite(i));
    }
    if points.len() < 4 {
        return Err(GeometryError::TooSmall { vertices: points.len(), faces: 0 });
    }
    let scale = points.iter().map(|p| p.amax()).fold(0.0, f64::max).max(1e-3);
    let eps = 1e-10 * scale;

    // Initial tetrahedron from extreme points.
    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a].x.total_cmp(&points[b].x))
        .unwrap();
    let i1 = farthest(points, |p| (p - points[i0]).norm());
    let dir = points[i1] - points[i0];
    if dir.norm() <= eps {
        return Err(GeometryError::Degenerate("all points coincide".into()));
    }
    let i2 = farthest(points, |p| (p - points[i0]).cross(&dir).norm());
    let plane_n = dir.cross(&(points[i2] - points[i0]));
    if plane_n.norm() <= eps * dir.norm() {
        return Err(GeometryError::Degenerate("all points are collinear".into()));
    }
    let plane_n = plane_n.normalize();
    let i3 = farthest(points, |p| plane_n.dot(&(p - points[i0])).abs());
    if plane_n.dot(&(points[i3] - points[i0])).abs() <= eps {
        return Err(GeometryError::Degenerate("all points are coplanar".into()));
    }

    let interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    let mut tris: Vec<Tri> = Vec::new();
    for &(a, b, c) in &[(i0, i1, i2), (i0, i1, i3), (i0, i2, i3), (i1, i2, i3)] {
        let t = Tri::new(points, a, b, c);
        if t.height(&interior) > 0.0 {
            tris.push(Tri::new(points, a, c, b));
        } else {
            tris.push(t);
        }
    }

    let seed: HashSet<usize> = [i0, i1, i2, i3].into_iter().collect();
    for (pi, p) in points.iter().enumerate() {
        if seed.contains(&pi) {
            continue;
        }
        let visible: Vec<bool> = tris.iter().map(|t| t.height(p) > eps).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut vis_edges: HashSet<(usize, usize)> = HashSet::new();
        for (t, _) in tris.iter().zip(&visible).filter(|(_, &v)| v) {
            for k in 0..3 {
                vis_edges.insert((t.v[k], t.v[(k + 1) % 3]));
            }
        }
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        for (t, _) in tris.iter().zip(&visible).filter(|(_, &v)| v) {
            for k in 0..3 {
                let e = (t.v[k], t.v[(k + 1) % 3]);
                if !vis_edges.contains(&(e.1, e.0)) {
                    horizon.push(e);
                }
            }
        }
        let mut kept: Vec<Tri> =
            tris.iter().zip(&visible).filter(|(_, &v)| !v).map(|(t, _)| *t).collect();
        for (a, b) in horizon {
            kept.push(Tri::new(points, a, b, pi));
        }
        tris = kept;
    }

    merge_coplanar(points, &tris)
}

fn farthest(points: &[Vec3], f: impl Fn(&Vec3) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let v = f(p);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

fn merge_coplanar(
    points: &[Vec3],
    tris: &[Tri],
) -> Result<(Vec<Vec3>, Vec<Vec<usize>>), GeometryError> {
    // Union triangles whose planes agree into groups.
    let mut group = vec![usize::MAX; tris.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..tris.len() {
        if group[i] != usize::MAX {
            continue;
        }
        let g = groups.len();
        let mut members = vec![i];
        group[i] = g;
        for j in i + 1..tris.len() {
            if group[j] == usize::MAX
                && tris[i].normal.dot(&tris[j].normal) > 1.0 - 1e-9
                && (tris[i].offset - tris[j].offset).abs() < 1e-9
            {
                group[j] = g;
                members.push(j);
            }
        }
        groups.push(members);
    }

    let mut rings_global: Vec<Vec<usize>> = Vec::with_capacity(groups.len());
    for members in &groups {
        let mut edges: HashSet<(usize, usize)> = HashSet::new();
        for &m in members {
            let t = &tris[m];
            for k in 0..3 {
                edges.insert((t.v[k], t.v[(k + 1) % 3]));
            }
        }
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in &edges {
            if !edges.contains(&(b, a)) {
                next.insert(a, b);
            }
        }
        let start = *next.keys().next().ok_or_else(|| {
            GeometryError::Degenerate("face group without boundary".into())
        })?;
        let mut ring = vec![start];
        let mut cur = next[&start];
        while cur != start {
            ring.push(cur);
            cur = *next.get(&cur).ok_or_else(|| {
                GeometryError::Degenerate("face boundary is not a closed loop".into())
            })?;
            if ring.len() > next.len() {
                return Err(GeometryError::Degenerate("face boundary loops".into()));
            }
        }
        // Drop vertices that sit on a straight edge of the polygon.
        let n = tris[members[0]].normal;
        let ring = drop_collinear(points, ring, &n);
        rings_global.push(ring);
    }

    // Compact the vertex list to hull vertices, preserving input order.
    let mut used: Vec<usize> = rings_global.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut remap = vec![usize::MAX; points.len()];
    for (new, &old) in used.iter().enumerate() {
        remap[old] = new;
    }
    let vertices = used.iter().map(|&i| points[i]).collect();
    let rings = rings_global
        .into_iter()
        .map(|r| r.into_iter().map(|i| remap[i]).collect())
        .collect();
    Ok((vertices, rings))
}

fn drop_collinear(points: &[Vec3], ring: Vec<usize>, normal: &Vec3) -> Vec<usize> {
    let n = ring.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let prev = points[ring[(k + n - 1) % n]];
        let cur = points[ring[k]];
        let next = points[ring[(k + 1) % n]];
        let turn = (cur - prev).cross(&(next - cur)).dot(normal);
        let scale = (cur - prev).norm() * (next - cur).norm();
        if turn > 1e-10 * scale.max(1e-30) {
            out.push(ring[k]);
        }
    }
    if out.len() >= 3 {
        out
    } else {
        ring
    }
}
