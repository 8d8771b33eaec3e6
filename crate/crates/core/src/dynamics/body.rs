use std::sync::Arc;

use crate::geometry::{transform_point, ConvexPolyhedron, Mat3, RigidPose, UnitQuaternion, Vec3};

use super::DynamicsError;

/// A convex rigid body. The pose maps the body frame (the frame the hull
/// vertices are expressed in) to the world; velocities are those of the
/// center of mass.
#[derive(Debug, Clone)]
pub struct RigidBody {
    pub shape: Arc<ConvexPolyhedron>,
    pub pose: RigidPose,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
    /// Set while the body is merged into a composite (see
    /// [`BodySet::freeze`]); its own mass is then carried by the composite.
    pub frozen: bool,
    mass: f64,
    inv_mass: f64,
    com_local: Vec3,
    inv_inertia_local: Mat3,
    inertia_local: Mat3,
}

impl RigidBody {
    /// Dynamic body with uniform density chosen to match `mass`.
    pub fn new(shape: Arc<ConvexPolyhedron>, mass: f64, pose: RigidPose) -> Result<Self, DynamicsError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(DynamicsError::InvalidParameter(format!("body mass {mass} must be positive")));
        }
        let mp = shape.mass_properties(mass / shape.volume());
        let inv = mp
            .inertia
            .try_inverse()
            .ok_or_else(|| DynamicsError::InvalidParameter("singular inertia tensor".into()))?;
        Ok(Self {
            shape,
            pose,
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            frozen: false,
            mass,
            inv_mass: 1.0 / mass,
            com_local: mp.center_of_mass,
            inv_inertia_local: inv,
            inertia_local: mp.inertia,
        })
    }

    /// Immovable body (infinite mass).
    pub fn new_static(shape: Arc<ConvexPolyhedron>, pose: RigidPose) -> Self {
        let com_local = shape.centroid();
        Self {
            shape,
            pose,
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            frozen: false,
            mass: f64::INFINITY,
            inv_mass: 0.0,
            com_local,
            inv_inertia_local: Mat3::zeros(),
            inertia_local: Mat3::zeros(),
        }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Inverse mass seen by the solver; zero while frozen or static.
    pub fn inverse_mass(&self) -> f64 {
        if self.frozen {
            0.0
        } else {
            self.inv_mass
        }
    }

    pub fn is_static(&self) -> bool {
        self.inv_mass == 0.0
    }

    pub fn com_local(&self) -> Vec3 {
        self.com_local
    }

    pub fn center_of_mass(&self) -> Vec3 {
        transform_point(&self.pose, &self.com_local)
    }

    /// Inertia about the center of mass in world axes.
    pub fn inertia_world(&self) -> Mat3 {
        let r = self.pose.rotation.to_rotation_matrix();
        r.matrix() * self.inertia_local * r.matrix().transpose()
    }

    /// Inverse inertia in world axes; zero while frozen or static.
    pub fn inverse_inertia_world(&self) -> Mat3 {
        if self.frozen {
            return Mat3::zeros();
        }
        let r = self.pose.rotation.to_rotation_matrix();
        r.matrix() * self.inv_inertia_local * r.matrix().transpose()
    }

    pub fn velocity_at(&self, world_point: &Vec3) -> Vec3 {
        self.linear_velocity + self.angular_velocity.cross(&(world_point - self.center_of_mass()))
    }

    /// Places the body so that its center of mass sits at `com` with the
    /// given orientation.
    pub fn set_com_pose(&mut self, com: Vec3, rotation: UnitQuaternion) {
        let t = com - rotation * self.com_local;
        self.pose = RigidPose::from_parts(t.into(), rotation);
    }
}

/// Per-solve view of a body (or of a frozen composite).
#[derive(Debug, Clone, Copy)]
pub struct SolverBody {
    pub inv_mass: f64,
    pub inv_inertia: Mat3,
    pub com: Vec3,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
}

#[derive(Debug, Clone)]
struct Composite {
    members: Vec<usize>,
    com: Vec3,
    rotation: UnitQuaternion,
    inv_mass: f64,
    inertia_local: Mat3,
    inv_inertia_local: Mat3,
    linear_velocity: Vec3,
    angular_velocity: Vec3,
    /// Member poses relative to the composite frame.
    relative: Vec<RigidPose>,
}

impl Composite {
    fn frame(&self) -> RigidPose {
        RigidPose::from_parts(self.com.into(), self.rotation)
    }

    fn inv_inertia_world(&self) -> Mat3 {
        let r = self.rotation.to_rotation_matrix();
        r.matrix() * self.inv_inertia_local * r.matrix().transpose()
    }
}

/// The bodies of one simulated world, with optional freezing of a subset
/// into a single rigid composite.
#[derive(Debug, Clone, Default)]
pub struct BodySet {
    bodies: Vec<RigidBody>,
    composite: Option<Composite>,
}

impl BodySet {
    pub fn new(bodies: Vec<RigidBody>) -> Self {
        Self { bodies, composite: None }
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn bodies(&self) -> &[RigidBody] {
        &self.bodies
    }

    pub fn get(&self, i: usize) -> Option<&RigidBody> {
        self.bodies.get(i)
    }

    /// Mutable access to the bodies. Not available while frozen, because
    /// editing a member would desynchronize it from the composite.
    pub fn bodies_mut(&mut self) -> &mut [RigidBody] {
        assert!(self.composite.is_none(), "cannot edit bodies while frozen");
        &mut self.bodies
    }

    pub fn poses(&self) -> Vec<RigidPose> {
        self.bodies.iter().map(|b| b.pose).collect()
    }

    /// Overwrites poses and zeroes velocities.
    pub fn set_poses(&mut self, poses: &[RigidPose]) {
        self.unfreeze();
        for (b, p) in self.bodies.iter_mut().zip(poses) {
            b.pose = *p;
            b.linear_velocity = Vec3::zeros();
            b.angular_velocity = Vec3::zeros();
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.composite.is_some()
    }

    /// Merges `members` into one rigid composite, conserving linear and
    /// angular momentum. Static bodies are ignored.
    pub fn freeze(&mut self, members: &[usize]) {
        self.unfreeze();
        let members: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| i < self.bodies.len() && !self.bodies[i].is_static())
            .collect();
        if members.is_empty() {
            return;
        }
        let total: f64 = members.iter().map(|&i| self.bodies[i].mass).sum();
        let com = members
            .iter()
            .map(|&i| self.bodies[i].center_of_mass() * self.bodies[i].mass)
            .sum::<Vec3>()
            / total;
        let mut inertia = Mat3::zeros();
        let mut momentum = Vec3::zeros();
        let mut angular = Vec3::zeros();
        for &i in &members {
            let b = &self.bodies[i];
            let r = b.center_of_mass() - com;
            let ib = b.inertia_world();
            inertia += ib + (Mat3::identity() * r.norm_squared() - r * r.transpose()) * b.mass;
            momentum += b.linear_velocity * b.mass;
            angular += ib * b.angular_velocity + r.cross(&b.linear_velocity) * b.mass;
        }
        let inv_inertia = inertia.try_inverse().unwrap_or_else(Mat3::zeros);
        let rotation = UnitQuaternion::identity();
        let frame = RigidPose::from_parts(com.into(), rotation);
        let relative = members.iter().map(|&i| frame.inverse() * self.bodies[i].pose).collect();
        for &i in &members {
            self.bodies[i].frozen = true;
        }
        self.composite = Some(Composite {
            members,
            com,
            rotation,
            inv_mass: 1.0 / total,
            inertia_local: inertia,
            inv_inertia_local: inv_inertia,
            linear_velocity: momentum / total,
            angular_velocity: inv_inertia * angular,
            relative,
        });
    }

    /// Releases the composite. Members keep the rigid-motion velocity field
    /// of the composite.
    pub fn unfreeze(&mut self) {
        if let Some(c) = self.composite.take() {
            for &i in &c.members {
                let b = &mut self.bodies[i];
                b.frozen = false;
                let r = b.center_of_mass() - c.com;
                b.linear_velocity = c.linear_velocity + c.angular_velocity.cross(&r);
                b.angular_velocity = c.angular_velocity;
            }
        }
    }

    /// Solver index of a body: its own index, or `len()` for frozen members.
    pub fn solver_index(&self, body: usize) -> usize {
        if self.bodies[body].frozen && self.composite.is_some() {
            self.bodies.len()
        } else {
            body
        }
    }

    /// Center of mass of a solver body.
    pub fn solver_com(&self, solver_index: usize) -> Vec3 {
        if solver_index == self.bodies.len() {
            self.composite.as_ref().map(|c| c.com).unwrap_or_default()
        } else {
            self.bodies[solver_index].center_of_mass()
        }
    }

    pub fn solver_bodies(&self) -> Vec<SolverBody> {
        let mut out: Vec<SolverBody> = self
            .bodies
            .iter()
            .map(|b| SolverBody {
                inv_mass: b.inverse_mass(),
                inv_inertia: b.inverse_inertia_world(),
                com: b.center_of_mass(),
                linear_velocity: if b.frozen { Vec3::zeros() } else { b.linear_velocity },
                angular_velocity: if b.frozen { Vec3::zeros() } else { b.angular_velocity },
            })
            .collect();
        if let Some(c) = &self.composite {
            out.push(SolverBody {
                inv_mass: c.inv_mass,
                inv_inertia: c.inv_inertia_world(),
                com: c.com,
                linear_velocity: c.linear_velocity,
                angular_velocity: c.angular_velocity,
            });
        }
        out
    }

    /// Copies solved velocities back.
    pub fn write_back(&mut self, solved: &[SolverBody]) {
        for (b, s) in self.bodies.iter_mut().zip(solved) {
            if !b.frozen && !b.is_static() {
                b.linear_velocity = s.linear_velocity;
                b.angular_velocity = s.angular_velocity;
            }
        }
        if let Some(c) = &mut self.composite {
            let s = &solved[self.bodies.len()];
            c.linear_velocity = s.linear_velocity;
            c.angular_velocity = s.angular_velocity;
            for &i in &c.members {
                let b = &mut self.bodies[i];
                let r = b.center_of_mass() - c.com;
                b.linear_velocity = c.linear_velocity + c.angular_velocity.cross(&r);
                b.angular_velocity = c.angular_velocity;
            }
        }
    }

    /// Semi-implicit Euler step of all poses followed by velocity damping.
    pub fn integrate(&mut self, dt: f64, damping: f64) {
        let keep = 1.0 - damping;
        for b in self.bodies.iter_mut().filter(|b| !b.frozen && !b.is_static()) {
            let com = b.center_of_mass() + b.linear_velocity * dt;
            let rot = integrate_rotation(&b.pose.rotation, &b.angular_velocity, dt);
            b.set_com_pose(com, rot);
            b.linear_velocity *= keep;
            b.angular_velocity *= keep;
        }
        if let Some(c) = &mut self.composite {
            c.com += c.linear_velocity * dt;
            c.rotation = integrate_rotation(&c.rotation, &c.angular_velocity, dt);
            c.linear_velocity *= keep;
            c.angular_velocity *= keep;
            let frame = c.frame();
            for (k, &i) in c.members.iter().enumerate() {
                let b = &mut self.bodies[i];
                b.pose = frame * c.relative[k];
                let r = b.center_of_mass() - c.com;
                b.linear_velocity = c.linear_velocity + c.angular_velocity.cross(&r);
                b.angular_velocity = c.angular_velocity;
            }
        }
    }

    /// Shifts a free body's center of mass by `dx` and rotates it by the
    /// scaled axis `dtheta` about the center of mass. Frozen and static
    /// bodies are left alone.
    pub(crate) fn displace(&mut self, body: usize, dx: Vec3, dtheta: Vec3) {
        let b = &mut self.bodies[body];
        if b.frozen || b.is_static() {
            return;
        }
        let com = b.center_of_mass() + dx;
        let rot = integrate_rotation(&b.pose.rotation, &dtheta, 1.0);
        b.set_com_pose(com, rot);
    }

    /// Composite inertia about its center of mass, world axes. Exposed for
    /// diagnostics.
    pub fn composite_inertia(&self) -> Option<Mat3> {
        self.composite.as_ref().map(|c| {
            let r = c.rotation.to_rotation_matrix();
            r.matrix() * c.inertia_local * r.matrix().transpose()
        })
    }
}

pub(crate) fn integrate_rotation(q: &UnitQuaternion, w: &Vec3, dt: f64) -> UnitQuaternion {
    let dq = UnitQuaternion::from_scaled_axis(w * dt);
    let mut out = dq * q;
    out.renormalize();
    out
}
