use crate::geometry::{skew, transform_point, Mat3, RigidPose};

use super::{limit_violation, measure_joint_angles, BodySet, Constraint, ConstraintRow, JointAngles, RowKind, SolverBody};

/// Sequential-impulse (projected Gauss-Seidel) solve over `rows`.
///
/// Each sweep visits the rows in order, computes the impulse that would
/// bring `J v` to the row's bias, clamps the accumulated impulse to the row
/// bounds and applies the difference to both bodies.
pub fn solve(rows: &mut [ConstraintRow], bodies: &mut [SolverBody], iterations: usize) {
    let eff: Vec<f64> = rows.iter().map(|r| effective_mass(r, bodies)).collect();
    for _ in 0..iterations {
        for (row, &m) in rows.iter_mut().zip(&eff) {
            if m == 0.0 {
                continue;
            }
            let jv = relative_velocity(row, bodies);
            let delta = (row.bias - jv) * m;
            let total = (row.accumulated + delta).clamp(row.lower, row.upper);
            let applied = total - row.accumulated;
            row.accumulated = total;
            debug_assert!(row.accumulated >= row.lower && row.accumulated <= row.upper);
            if applied != 0.0 {
                apply(row, bodies, applied);
            }
        }
    }
}

/// `J v` for a row.
pub fn relative_velocity(row: &ConstraintRow, bodies: &[SolverBody]) -> f64 {
    let a = &bodies[row.body_a];
    let mut jv = row.linear_a.dot(&a.linear_velocity) + row.angular_a.dot(&a.angular_velocity);
    if let Some(b) = row.body_b {
        let b = &bodies[b];
        jv += row.linear_b.dot(&b.linear_velocity) + row.angular_b.dot(&b.angular_velocity);
    }
    jv
}

fn effective_mass(row: &ConstraintRow, bodies: &[SolverBody]) -> f64 {
    let a = &bodies[row.body_a];
    let mut k = row.linear_a.norm_squared() * a.inv_mass + row.angular_a.dot(&(a.inv_inertia * row.angular_a));
    if let Some(b) = row.body_b {
        let b = &bodies[b];
        k += row.linear_b.norm_squared() * b.inv_mass + row.angular_b.dot(&(b.inv_inertia * row.angular_b));
    }
    if k > 1e-15 {
        1.0 / k
    } else {
        0.0
    }
}

fn apply(row: &ConstraintRow, bodies: &mut [SolverBody], impulse: f64) {
    {
        let a = &mut bodies[row.body_a];
        a.linear_velocity += row.linear_a * (a.inv_mass * impulse);
        a.angular_velocity += a.inv_inertia * row.angular_a * impulse;
    }
    if let Some(b) = row.body_b {
        let b = &mut bodies[b];
        b.linear_velocity += row.linear_b * (b.inv_mass * impulse);
        b.angular_velocity += b.inv_inertia * row.angular_b * impulse;
    }
}

/// Counters from one world step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub rows: usize,
    pub surface_rows: usize,
    /// Sum of |accumulated impulse| over surface rows.
    pub surface_impulse: f64,
    /// Sum of the caps of all surface rows.
    pub surface_cap_total: f64,
}

impl StepStats {
    pub(crate) fn from_rows(rows: &[ConstraintRow]) -> Self {
        let mut s = StepStats { rows: rows.len(), ..Default::default() };
        for r in rows.iter().filter(|r| r.kind == RowKind::Surface) {
            s.surface_rows += 1;
            s.surface_impulse += r.accumulated.abs();
            s.surface_cap_total += r.upper;
        }
        s
    }

    pub fn accumulate(&mut self, other: &StepStats) {
        self.rows += other.rows;
        self.surface_rows += other.surface_rows;
        self.surface_impulse += other.surface_impulse;
        self.surface_cap_total += other.surface_cap_total;
    }
}

/// Advances poses with the solved velocities, then damps them.
pub fn integrate(bodies: &mut BodySet, config: &super::SolverConfig) {
    bodies.integrate(config.dt, config.damping);
}

/// Removes residual ball-joint separation by moving poses directly with
/// mass-weighted pseudo-impulses. Velocities are not touched. Joints with a
/// frozen member are skipped; the composite keeps them exact anyway.
pub fn project_joints(bodies: &mut BodySet, constraints: &[Constraint], iterations: usize) {
    for _ in 0..iterations {
        for c in constraints {
            let Constraint::BallJoint { parent, child, parent_anchor, child_anchor } = *c else {
                continue;
            };
            let (a, b) = (&bodies.bodies()[parent], &bodies.bodies()[child]);
            if a.frozen || b.frozen {
                continue;
            }
            let pa = transform_point(&a.pose, &parent_anchor);
            let pb = transform_point(&b.pose, &child_anchor);
            let err = pb - pa;
            if err.norm_squared() < 1e-18 {
                continue;
            }
            let ra = pa - a.center_of_mass();
            let rb = pb - b.center_of_mass();
            let (ia, ib) = (a.inverse_inertia_world(), b.inverse_inertia_world());
            let (sa, sb) = (skew(&ra), skew(&rb));
            let k = Mat3::identity() * (a.inverse_mass() + b.inverse_mass()) - sa * ia * sa - sb * ib * sb;
            let Some(kinv) = k.try_inverse() else { continue };
            let p = kinv * err;
            let (ma, mb) = (a.inverse_mass(), b.inverse_mass());
            let (wa, wb) = (ia * ra.cross(&p), ib * rb.cross(&p));
            bodies.displace(parent, p * ma, wa);
            bodies.displace(child, -p * mb, -wb);
        }
    }
}

/// Exact closure for joint trees: per joint, the child's whole subtree is
/// translated so the anchors coincide, then rotated about the anchor until
/// the measured angles lie within the limits. A rigid subtree move changes
/// only that one joint, so a single pass in any order is exact. Skipped
/// when the joints do not form a forest or a subtree holds a frozen or
/// static body.
pub fn close_joint_tree(bodies: &mut BodySet, constraints: &[Constraint]) {
    let n = bodies.len();
    let mut parent_of: Vec<Option<usize>> = vec![None; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut joints = Vec::new();
    for c in constraints {
        if let Constraint::BallJoint { parent, child, parent_anchor, child_anchor } = *c {
            if parent >= n || child >= n || parent_of[child].is_some() || parent == child {
                return;
            }
            parent_of[child] = Some(parent);
            children[parent].push(child);
            joints.push((parent, child, parent_anchor, child_anchor));
        }
    }
    // A cycle shows up as a body that is its own ancestor.
    for b in 0..n {
        let mut cur = parent_of[b];
        let mut steps = 0;
        while let Some(p) = cur {
            steps += 1;
            if p == b || steps > n {
                return;
            }
            cur = parent_of[p];
        }
    }
    let subtree = |root: usize| {
        let mut out = vec![root];
        let mut k = 0;
        while k < out.len() {
            out.extend(children[out[k]].iter().copied());
            k += 1;
        }
        out
    };
    let movable = |bodies: &BodySet, set: &[usize]| set.iter().all(|&i| !bodies.bodies()[i].frozen && !bodies.bodies()[i].is_static());
    for &(parent, child, parent_anchor, child_anchor) in &joints {
        let set = subtree(child);
        if !movable(bodies, &set) || bodies.bodies()[parent].frozen {
            continue;
        }
        let pa = transform_point(&bodies.bodies()[parent].pose, &parent_anchor);
        let pb = transform_point(&bodies.bodies()[child].pose, &child_anchor);
        let shift = pa - pb;
        for &i in &set {
            let b = &mut bodies.bodies_mut()[i];
            b.pose.translation.vector += shift;
        }
    }
    for c in constraints {
        let Constraint::AngularLimit { parent, child, parent_frame, limits } = *c else { continue };
        if parent >= n || child >= n {
            continue;
        }
        let set = subtree(child);
        if !movable(bodies, &set) || bodies.bodies()[parent].frozen {
            continue;
        }
        let (pp, pc) = (bodies.bodies()[parent].pose, bodies.bodies()[child].pose);
        let angles = measure_joint_angles(&pp, &pc, &parent_frame);
        if limit_violation(&angles, &limits) == 0.0 {
            continue;
        }
        let [t, y, z] = angles.as_array();
        let [lt, ly, lz] = limits.as_array();
        let clamped = JointAngles { twist: t.clamp(lt[0], lt[1]), swing_y: y.clamp(ly[0], ly[1]), swing_z: z.clamp(lz[0], lz[1]) };
        let target = pp.rotation * parent_frame * clamped.to_rotation();
        let delta = target * pc.rotation.inverse();
        let pivot = joints
            .iter()
            .find(|j| j.1 == child)
            .map_or(pc.translation.vector, |j| transform_point(&pc, &j.3));
        for &i in &set {
            let b = &mut bodies.bodies_mut()[i];
            let origin = pivot + delta * (b.pose.translation.vector - pivot);
            b.pose = RigidPose::from_parts(origin.into(), delta * b.pose.rotation);
        }
    }
}
