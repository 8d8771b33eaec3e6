use serde::{Deserialize, Serialize};

use crate::geometry::{any_perpendicular, transform_point, RigidPose, UnitQuaternion, Vec3};

use super::{BodySet, DynamicsError, SolverConfig};

/// Angular range `[min, max]` in radians for each joint axis. Axes follow
/// the joint frame: twist about x (the bone axis), abduction about y, flexion
/// about z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub twist: [f64; 2],
    pub swing_y: [f64; 2],
    pub swing_z: [f64; 2],
}

impl JointLimits {
    pub fn as_array(&self) -> [[f64; 2]; 3] {
        [self.twist, self.swing_y, self.swing_z]
    }

    pub fn is_well_ordered(&self) -> bool {
        self.as_array().iter().all(|[lo, hi]| lo.is_finite() && hi.is_finite() && lo <= hi)
    }
}

/// Joint angles of a child relative to its parent's joint frame, using the
/// decomposition `R = Rz(flex) · Ry(abduction) · Rx(twist)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAngles {
    pub twist: f64,
    pub swing_y: f64,
    pub swing_z: f64,
}

impl JointAngles {
    pub fn as_array(&self) -> [f64; 3] {
        [self.twist, self.swing_y, self.swing_z]
    }

    pub fn to_rotation(&self) -> UnitQuaternion {
        UnitQuaternion::from_euler_angles(self.twist, self.swing_y, self.swing_z)
    }
}

/// Measures the joint angles between two posed bodies.
pub fn measure_joint_angles(parent: &RigidPose, child: &RigidPose, parent_frame: &UnitQuaternion) -> JointAngles {
    let rel = (parent.rotation * parent_frame).inverse() * child.rotation;
    let (twist, swing_y, swing_z) = rel.euler_angles();
    JointAngles { twist, swing_y, swing_z }
}

/// Largest amount (radians) by which a measured angle exceeds its range.
pub fn limit_violation(angles: &JointAngles, limits: &JointLimits) -> f64 {
    angles
        .as_array()
        .iter()
        .zip(limits.as_array())
        .map(|(a, [lo, hi])| (lo - a).max(a - hi).max(0.0))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// Coincident anchor points; three unbounded linear rows.
    BallJoint { parent: usize, child: usize, parent_anchor: Vec3, child_anchor: Vec3 },
    /// Swing/twist range of the child relative to `parent_frame` (expressed
    /// in the parent body frame).
    AngularLimit { parent: usize, child: usize, parent_frame: UnitQuaternion, limits: JointLimits },
    /// One-sided half-space `normal · x >= offset` acting on every hull
    /// vertex of `body`.
    ContactPlane { body: usize, normal: Vec3, offset: f64 },
    /// Mutual non-penetration between two hulls, from vertex-in-hull tests.
    Separation { a: usize, b: usize },
    /// One-dimensional capped pull of a body surface point toward a target.
    SurfaceAttachment {
        body: usize,
        face: usize,
        /// Attachment point on the face, body frame.
        local_point: Vec3,
        target: Vec3,
        direction: Vec3,
        cap: f64,
    },
    /// Keeps the `axis` (body frame, same for both) of two bodies within
    /// `max_deviation` radians of parallel.
    OrientationParallel { a: usize, b: usize, axis: Vec3, max_deviation: f64 },
    /// Capped angular drive toward a world orientation.
    PoseNudge { body: usize, target: UnitQuaternion, cap: f64 },
}

/// Row categories in solve order. Later categories are processed later in
/// every sweep, so structural rows get the final word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowKind {
    Surface,
    Nudge,
    Contact,
    Orientation,
    Limit,
    Joint,
}

/// One scalar velocity constraint `J v -> bias` with impulse bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintRow {
    pub kind: RowKind,
    pub body_a: usize,
    pub body_b: Option<usize>,
    pub linear_a: Vec3,
    pub angular_a: Vec3,
    pub linear_b: Vec3,
    pub angular_b: Vec3,
    /// Target value of `J v` (m/s or rad/s).
    pub bias: f64,
    pub lower: f64,
    pub upper: f64,
    pub accumulated: f64,
}

impl ConstraintRow {
    fn single(kind: RowKind, body: usize, linear: Vec3, angular: Vec3, bias: f64, lower: f64, upper: f64) -> Self {
        Self {
            kind,
            body_a: body,
            body_b: None,
            linear_a: linear,
            angular_a: angular,
            linear_b: Vec3::zeros(),
            angular_b: Vec3::zeros(),
            bias,
            lower,
            upper,
            accumulated: 0.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn pair(
        kind: RowKind,
        a: usize,
        b: usize,
        linear_a: Vec3,
        angular_a: Vec3,
        linear_b: Vec3,
        angular_b: Vec3,
        bias: f64,
        lower: f64,
        upper: f64,
    ) -> Self {
        Self { kind, body_a: a, body_b: Some(b), linear_a, angular_a, linear_b, angular_b, bias, lower, upper, accumulated: 0.0 }
    }
}

fn finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

fn check_body(bodies: &BodySet, i: usize) -> Result<(), DynamicsError> {
    if i < bodies.len() {
        Ok(())
    } else {
        Err(DynamicsError::UnknownBody(i))
    }
}

impl Constraint {
    /// Rejects unknown body references and non-finite parameters.
    pub fn validate(&self, bodies: &BodySet) -> Result<(), DynamicsError> {
        let nan = |what: &str| Err(DynamicsError::InvalidParameter(format!("non-finite {what}")));
        match self {
            Constraint::BallJoint { parent, child, parent_anchor, child_anchor } => {
                check_body(bodies, *parent)?;
                check_body(bodies, *child)?;
                if !finite(parent_anchor) || !finite(child_anchor) {
                    return nan("joint anchor");
                }
            }
            Constraint::AngularLimit { parent, child, parent_frame, limits } => {
                check_body(bodies, *parent)?;
                check_body(bodies, *child)?;
                if !parent_frame.coords.iter().all(|c| c.is_finite()) {
                    return nan("joint frame");
                }
                if !limits.is_well_ordered() {
                    return Err(DynamicsError::InvalidParameter("angular limits must satisfy min <= max".into()));
                }
            }
            Constraint::ContactPlane { body, normal, offset } => {
                check_body(bodies, *body)?;
                if !finite(normal) || !offset.is_finite() {
                    return nan("contact plane");
                }
            }
            Constraint::Separation { a, b } => {
                check_body(bodies, *a)?;
                check_body(bodies, *b)?;
            }
            Constraint::SurfaceAttachment { body, face, local_point, target, direction, cap } => {
                check_body(bodies, *body)?;
                if *face >= bodies.bodies()[*body].shape.faces().len() {
                    return Err(DynamicsError::InvalidParameter(format!("face {face} out of range")));
                }
                if !finite(local_point) || !finite(target) || !finite(direction) || !cap.is_finite() {
                    return nan("surface attachment parameter");
                }
                if *cap < 0.0 {
                    return Err(DynamicsError::InvalidParameter("impulse cap must be >= 0".into()));
                }
            }
            Constraint::OrientationParallel { a, b, axis, max_deviation } => {
                check_body(bodies, *a)?;
                check_body(bodies, *b)?;
                if !finite(axis) || !max_deviation.is_finite() {
                    return nan("orientation constraint parameter");
                }
            }
            Constraint::PoseNudge { body, target, cap } => {
                check_body(bodies, *body)?;
                if !target.coords.iter().all(|c| c.is_finite()) || !cap.is_finite() {
                    return nan("pose nudge parameter");
                }
                if *cap < 0.0 {
                    return Err(DynamicsError::InvalidParameter("impulse cap must be >= 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Lowers constraints to scalar rows against the current body state. The
/// result is ordered by [`RowKind`] (stable within a kind).
pub fn lower_constraints(
    constraints: &[Constraint],
    bodies: &BodySet,
    config: &SolverConfig,
) -> Result<Vec<ConstraintRow>, DynamicsError> {
    let mut rows = Vec::new();
    for c in constraints {
        c.validate(bodies)?;
        lower_one(c, bodies, config, &mut rows);
    }
    rows.sort_by_key(|r| r.kind);
    Ok(rows)
}

fn lower_one(c: &Constraint, bodies: &BodySet, cfg: &SolverConfig, rows: &mut Vec<ConstraintRow>) {
    let dt = cfg.dt;
    let inv_dt = 1.0 / dt;
    let set = bodies.bodies();
    match c {
        Constraint::BallJoint { parent, child, parent_anchor, child_anchor } => {
            let (sa, sb) = (bodies.solver_index(*parent), bodies.solver_index(*child));
            if sa == sb {
                return;
            }
            let pa = transform_point(&set[*parent].pose, parent_anchor);
            let pb = transform_point(&set[*child].pose, child_anchor);
            let ra = pa - bodies.solver_com(sa);
            let rb = pb - bodies.solver_com(sb);
            let err = pa - pb;
            for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
                rows.push(ConstraintRow::pair(
                    RowKind::Joint,
                    sa,
                    sb,
                    axis,
                    ra.cross(&axis),
                    -axis,
                    -rb.cross(&axis),
                    -cfg.beta * inv_dt * err.dot(&axis),
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                ));
            }
        }
        Constraint::AngularLimit { parent, child, parent_frame, limits } => {
            let (sa, sb) = (bodies.solver_index(*parent), bodies.solver_index(*child));
            if sa == sb {
                return;
            }
            let frame_rot = set[*parent].pose.rotation * parent_frame;
            let angles = measure_joint_angles(&set[*parent].pose, &set[*child].pose, parent_frame);
            let axes = rate_axes(&angles);
            for k in 0..3 {
                let a = angles.as_array()[k];
                let [lo, hi] = limits.as_array()[k];
                let g = frame_rot * axes[k];
                if hi - a < cfg.angular_margin {
                    let bias = if a <= hi { (hi - a) * inv_dt } else { -cfg.beta * (a - hi) * inv_dt };
                    rows.push(ConstraintRow::pair(
                        RowKind::Limit, sa, sb, Vec3::zeros(), -g, Vec3::zeros(), g, bias, f64::NEG_INFINITY, 0.0,
                    ));
                }
                if a - lo < cfg.angular_margin {
                    let bias = if a >= lo { -(a - lo) * inv_dt } else { cfg.beta * (lo - a) * inv_dt };
                    rows.push(ConstraintRow::pair(
                        RowKind::Limit, sa, sb, Vec3::zeros(), -g, Vec3::zeros(), g, bias, 0.0, f64::INFINITY,
                    ));
                }
            }
        }
        Constraint::ContactPlane { body, normal, offset } => {
            let s = bodies.solver_index(*body);
            let n = normal.normalize();
            let com = bodies.solver_com(s);
            let b = &set[*body];
            for v in b.shape.vertices() {
                let p = transform_point(&b.pose, v);
                let sep = n.dot(&p) - offset;
                if sep < cfg.speculative_margin {
                    let bias = if sep >= 0.0 { -sep * inv_dt } else { -cfg.beta * sep * inv_dt };
                    rows.push(ConstraintRow::single(
                        RowKind::Contact, s, n, (p - com).cross(&n), bias, 0.0, f64::INFINITY,
                    ));
                }
            }
        }
        Constraint::Separation { a, b } => {
            let (sa, sb) = (bodies.solver_index(*a), bodies.solver_index(*b));
            if sa == sb {
                return;
            }
            let (ba, bb) = (&set[*a], &set[*b]);
            let reach = ba.shape.bounding_radius() + bb.shape.bounding_radius() + cfg.speculative_margin;
            let ca = transform_point(&ba.pose, &ba.shape.centroid());
            let cb = transform_point(&bb.pose, &bb.shape.centroid());
            if (ca - cb).norm() > reach {
                return;
            }
            separation_rows(bodies, *a, *b, sa, sb, cfg, rows);
            separation_rows(bodies, *b, *a, sb, sa, cfg, rows);
        }
        Constraint::SurfaceAttachment { body, local_point, target, direction, cap, .. } => {
            let s = bodies.solver_index(*body);
            let b = &set[*body];
            let p = transform_point(&b.pose, local_point);
            let d = direction.normalize();
            let gap = d.dot(&(target - p));
            rows.push(ConstraintRow::single(
                RowKind::Surface,
                s,
                d,
                (p - bodies.solver_com(s)).cross(&d),
                cfg.fit_gain * gap * inv_dt,
                -cap,
                *cap,
            ));
        }
        Constraint::OrientationParallel { a, b, axis, max_deviation } => {
            let (sa, sb) = (bodies.solver_index(*a), bodies.solver_index(*b));
            if sa == sb {
                return;
            }
            let xa = set[*a].pose.rotation * axis.normalize();
            let xb = set[*b].pose.rotation * axis.normalize();
            let angle = xa.dot(&xb).clamp(-1.0, 1.0).acos();
            if max_deviation - angle >= cfg.angular_margin {
                return;
            }
            let k = xa.cross(&xb);
            let k = if k.norm() > 1e-12 { k.normalize() } else { any_perpendicular(&xa) };
            let bias = if angle <= *max_deviation {
                (max_deviation - angle) * inv_dt
            } else {
                -cfg.beta * (angle - max_deviation) * inv_dt
            };
            rows.push(ConstraintRow::pair(
                RowKind::Orientation, sa, sb, Vec3::zeros(), -k, Vec3::zeros(), k, bias, f64::NEG_INFINITY, 0.0,
            ));
        }
        Constraint::PoseNudge { body, target, cap } => {
            let s = bodies.solver_index(*body);
            let err = (target * set[*body].pose.rotation.inverse()).scaled_axis();
            for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
                rows.push(ConstraintRow::single(
                    RowKind::Nudge,
                    s,
                    Vec3::zeros(),
                    axis,
                    cfg.nudge_gain * err.dot(&axis) * inv_dt,
                    -cap,
                    *cap,
                ));
            }
        }
    }
}

/// Rows keeping the vertices of `a` out of hull `b`.
fn separation_rows(
    bodies: &BodySet,
    a: usize,
    b: usize,
    sa: usize,
    sb: usize,
    cfg: &SolverConfig,
    rows: &mut Vec<ConstraintRow>,
) {
    let set = bodies.bodies();
    let (ba, bb) = (&set[a], &set[b]);
    let com_a = bodies.solver_com(sa);
    let com_b = bodies.solver_com(sb);
    let inv_dt = 1.0 / cfg.dt;
    for v in ba.shape.vertices() {
        let p = transform_point(&ba.pose, v);
        let local = bb.pose.inverse_transform_point(&p.into()).coords;
        let (h, face) = bb.shape.max_plane_distance(&local);
        if h >= cfg.speculative_margin {
            continue;
        }
        let n = bb.pose.rotation * bb.shape.faces()[face].normal;
        let bias = if h >= 0.0 { -h * inv_dt } else { -cfg.beta * h * inv_dt };
        rows.push(ConstraintRow::pair(
            RowKind::Contact,
            sa,
            sb,
            n,
            (p - com_a).cross(&n),
            -n,
            -(p - com_b).cross(&n),
            bias,
            0.0,
            f64::INFINITY,
        ));
    }
}

/// Dual basis turning relative angular velocity (joint frame) into the
/// rates of the three decomposition angles.
fn rate_axes(angles: &JointAngles) -> [Vec3; 3] {
    let rz = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), angles.swing_z);
    let ry = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), angles.swing_y);
    let e_flex = Vec3::z();
    let e_abd = rz * Vec3::y();
    let e_twist = rz * (ry * Vec3::x());
    let det = e_flex.dot(&e_abd.cross(&e_twist));
    let g_flex = e_abd.cross(&e_twist) / det;
    let g_abd = e_twist.cross(&e_flex) / det;
    let g_twist = e_flex.cross(&e_abd) / det;
    [g_twist, g_abd, g_flex]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_convention_is_zyx() {
        let a = JointAngles { twist: 0.1, swing_y: -0.2, swing_z: 0.7 };
        let q = a.to_rotation();
        let expect = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 0.7)
            * UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -0.2)
            * UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 0.1);
        assert!(q.angle_to(&expect) < 1e-12);
        let back = measure_joint_angles(&RigidPose::identity(), &RigidPose::from_parts(Vec3::zeros().into(), q), &UnitQuaternion::identity());
        assert!((back.twist - 0.1).abs() < 1e-12);
        assert!((back.swing_y + 0.2).abs() < 1e-12);
        assert!((back.swing_z - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rate_axes_match_finite_differences() {
        let a = JointAngles { twist: 0.15, swing_y: 0.3, swing_z: -0.4 };
        let axes = rate_axes(&a);
        let q0 = a.to_rotation();
        let w = Vec3::new(0.3, -0.7, 0.5);
        let h = 1e-7;
        let q1 = UnitQuaternion::from_scaled_axis(w * h) * q0;
        let (r, p, y) = q1.euler_angles();
        let fd = [(r - a.twist) / h, (p - a.swing_y) / h, (y - a.swing_z) / h];
        for k in 0..3 {
            assert!((axes[k].dot(&w) - fd[k]).abs() < 1e-5, "axis {k}");
        }
    }
}
